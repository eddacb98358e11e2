/// Hand-segmented fixture sentences.
pub const FIXTURES: &[(&str, &[&str])] = &[
    ("Ali geldi. Ayşe gitti.", &["Ali geldi.", "Ayşe gitti."]),
    ("Ar. Gör. Ali geldi.", &["Ar. Gör. Ali geldi."]),
    (
        "Yusuf Has Hacib (d. 998 - ö. 1068) bir şairdir.",
        &["Yusuf Has Hacib (d. 998 - ö. 1068) bir şairdir."],
    ),
    (
        "Ömer b. Abdülazīz adil bir halifeydi. Halkı onu severdi.",
        &["Ömer b. Abdülazīz adil bir halifeydi.", "Halkı onu severdi."],
    ),
    (
        "Bize bu örneği, Avrupa’da Afrikalı Leo (Leo Africanus) olarak tanınan el-hasan b. Muhammed el-Vezzan vermiştir. Papa X. Leo tarafından 6.1.1520 yılında vaftiz edilmişti.",
        &[
            "Bize bu örneği, Avrupa’da Afrikalı Leo (Leo Africanus) olarak tanınan el-hasan b. Muhammed el-Vezzan vermiştir.",
            "Papa X. Leo tarafından 6.1.1520 yılında vaftiz edilmişti.",
        ],
    ),
    (
        "Prof. Dr. Ayşe Yılmaz konuştu! Doç. Dr. Mehmet dinledi?",
        &["Prof. Dr. Ayşe Yılmaz konuştu!", "Doç. Dr. Mehmet dinledi?"],
    ),
    (
        "Kadı v.b. satın almıştır. Turkcell A.Ş. büyüdü.",
        &["Kadı v.b. satın almıştır.", "Turkcell A.Ş. büyüdü."],
    ),
    (
        "Afrika kitabını esaretinin 6. yılı olan 1526’da tamamladı. 935/1529 yılında Tunus’a döndü.",
        &[
            "Afrika kitabını esaretinin 6. yılı olan 1526’da tamamladı.",
            "935/1529 yılında Tunus’a döndü.",
        ],
    ),
    (
        "Anıt dikilmiştir (bk. Kutluoğlu, rs. nr. 7, 8). II. Mahmud buna kızdı.",
        &["Anıt dikilmiştir (bk. Kutluoğlu, rs. nr. 7, 8).", "II. Mahmud buna kızdı."],
    ),
    ("GSM, 2G , 3G , 4G ve 4.5G operatörüdür.", &["GSM, 2G , 3G , 4G ve 4.5G operatörüdür."]),
];
