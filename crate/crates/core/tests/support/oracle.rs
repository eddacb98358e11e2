//! Brute-force metric oracles sharing no code with the implementation:
//! explicit multiset pairing, n-gram enumeration by linear scan and
//! exhaustive subsequence search.
#![allow(dead_code)]

/// Token overlap by pairing each prediction token with an unused equal
/// reference token.
pub fn overlap(pred: &[&str], reference: &[&str]) -> usize {
    let mut used = vec![false; reference.len()];
    let mut n = 0;
    for p in pred {
        if let Some(i) = (0..reference.len()).find(|&i| !used[i] && reference[i] == *p) {
            used[i] = true;
            n += 1;
        }
    }
    n
}

pub fn f1(pred: &[&str], reference: &[&str]) -> f64 {
    if pred.is_empty() && reference.is_empty() {
        return 1.0;
    }
    let o = overlap(pred, reference) as f64;
    if o == 0.0 {
        return 0.0;
    }
    let p = o / pred.len() as f64;
    let r = o / reference.len() as f64;
    2.0 * p * r / (p + r)
}

fn ngrams<'a>(tokens: &[&'a str], n: usize) -> Vec<Vec<&'a str>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i + n <= tokens.len() {
        out.push(tokens[i..i + n].to_vec());
        i += 1;
    }
    out
}

fn occurrences(list: &[Vec<&str>], gram: &[&str]) -> usize {
    list.iter().filter(|g| g.as_slice() == gram).count()
}

/// Clipped matches and candidate totals for order `n`, pooled.
pub fn precision(pairs: &[(Vec<&str>, Vec<&str>)], n: usize) -> (usize, usize) {
    let (mut matched, mut total) = (0, 0);
    for (cand, reference) in pairs {
        let cg = ngrams(cand, n);
        let rg = ngrams(reference, n);
        let mut distinct: Vec<Vec<&str>> = Vec::new();
        for g in &cg {
            if !distinct.contains(g) {
                distinct.push(g.clone());
            }
        }
        for g in &distinct {
            matched += occurrences(&cg, g).min(occurrences(&rg, g));
        }
        total += cg.len();
    }
    (matched, total)
}

pub fn bleu(pairs: &[(Vec<&str>, Vec<&str>)], n: usize) -> f64 {
    let c: usize = pairs.iter().map(|(c, _)| c.len()).sum();
    let r: usize = pairs.iter().map(|(_, r)| r.len()).sum();
    if c == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for k in 1..=n {
        let (m, t) = precision(pairs, k);
        if m == 0 || t == 0 {
            return 0.0;
        }
        log_sum += (m as f64 / t as f64).ln();
    }
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    bp * (log_sum / n as f64).exp()
}

fn is_subsequence(needle: &[&str], hay: &[&str]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|t| it.any(|h| h == t))
}

/// Longest common subsequence by trying every subsequence of `a`.
pub fn lcs(a: &[&str], b: &[&str]) -> usize {
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let size = mask.count_ones() as usize;
        if size <= best {
            continue;
        }
        let picked: Vec<&str> = (0..a.len()).filter(|i| mask & (1 << i) != 0).map(|i| a[i]).collect();
        if is_subsequence(&picked, b) {
            best = size;
        }
    }
    best
}

pub fn rouge_l(pairs: &[(Vec<&str>, Vec<&str>)]) -> f64 {
    let mut total = 0.0;
    for (c, r) in pairs {
        total += if c.is_empty() && r.is_empty() {
            1.0
        } else {
            let l = lcs(c, r) as f64;
            if l == 0.0 {
                0.0
            } else {
                let p = l / c.len() as f64;
                let rc = l / r.len() as f64;
                2.0 * p * rc / (p + rc)
            }
        };
    }
    total / pairs.len() as f64
}
