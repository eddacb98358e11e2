//! Codepoint-indexed views over UTF-8 strings.
//!
//! Every public offset in this crate counts Unicode scalar values, never
//! bytes. The helpers here translate between the two.

use alloc::vec::Vec;

/// Number of Unicode scalar values in `s`.
#[inline]
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Byte offset of every char boundary in `s`, plus `s.len()` as the final
/// entry. `table[i]` is the byte offset of codepoint `i`.
pub fn boundary_table(s: &str) -> Vec<usize> {
    let mut table: Vec<usize> = s.char_indices().map(|(b, _)| b).collect();
    table.push(s.len());
    table
}

/// Byte offset of codepoint `index`, or `None` when `index > char_len(s)`.
pub fn byte_offset(s: &str, index: usize) -> Option<usize> {
    if index == 0 {
        return Some(0);
    }
    match s.char_indices().nth(index) {
        Some((b, _)) => Some(b),
        None if char_len(s) == index => Some(s.len()),
        None => None,
    }
}

/// Slice `s` by the half-open codepoint range `[start, end)`.
pub fn slice_chars(s: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let from = byte_offset(s, start)?;
    let to = from + byte_offset(&s[from..], end - start)?;
    Some(&s[from..to])
}

/// Codepoint index of the first occurrence of `needle` in `haystack` at or
/// after codepoint `from`.
pub fn find_chars(haystack: &str, needle: &str, from: usize) -> Option<usize> {
    let base = byte_offset(haystack, from)?;
    let hit = haystack[base..].find(needle)?;
    Some(from + char_len(&haystack[base..base + hit]))
}

/// A [`str`] paired with its codepoint boundary table, for repeated
/// codepoint slicing of the same text.
#[derive(Debug, Clone)]
pub struct IndexedText<'a> {
    text: &'a str,
    bounds: Vec<usize>,
}

impl<'a> IndexedText<'a> {
    pub fn new(text: &'a str) -> Self {
        Self {
            text,
            bounds: boundary_table(text),
        }
    }

    pub fn as_str(&self) -> &'a str {
        self.text
    }

    /// Length in codepoints.
    pub fn len(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn byte_at(&self, index: usize) -> usize {
        self.bounds[index]
    }

    /// Codepoint index of a byte offset that lies on a char boundary.
    pub fn char_at_byte(&self, byte: usize) -> usize {
        self.bounds.partition_point(|&b| b < byte)
    }

    pub fn slice(&self, start: usize, end: usize) -> Option<&'a str> {
        if start > end || end > self.len() {
            return None;
        }
        Some(&self.text[self.bounds[start]..self.bounds[end]])
    }
}
