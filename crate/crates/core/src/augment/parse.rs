use super::AugmentError;
use crate::model::{normalize_answer, QAItem};

/// Split a provider response into candidate questions, in response order.
///
/// Pieces are separated by semicolons or newlines. Enumeration prefixes
/// (`1.`, `2)`, `-`) are removed, and a trailing copy of the original answer
/// after `?`, `|` or `:` is cut off, since models often return
/// question/answer pairs despite being asked for questions only.
pub fn parse_variants(raw: &str, original: &QAItem) -> Result<Vec<String>, AugmentError> {
    let pieces: Vec<String> = raw
        .split([';', '\n'])
        .map(|p| strip_enumeration(p.trim()))
        .map(|p| strip_answer_suffix(p, &original.answer).trim().to_string())
        .filter(|p| !p.is_empty())
        .collect();
    if pieces.is_empty() {
        Err(AugmentError::EmptyResponse)
    } else {
        Ok(pieces)
    }
}

fn strip_enumeration(piece: &str) -> &str {
    if let Some(rest) = piece.strip_prefix('-') {
        return rest.trim_start();
    }
    let digits = piece.bytes().take_while(u8::is_ascii_digit).count();
    let rest = &piece[digits..];
    let Some(sep) = rest.chars().next().filter(|c| matches!(c, '.' | ')')) else {
        return piece;
    };
    let after = &rest[1..];
    let next = after.chars().next();
    let is_marker = match next {
        // "1.5 cm" is a number, not a list marker
        Some(c) if c.is_ascii_digit() && sep == '.' => false,
        // a bare "." or ")" only counts when followed by a space
        Some(c) if digits == 0 => c.is_whitespace(),
        _ => digits > 0 || next.is_none(),
    };
    if is_marker {
        after.trim_start()
    } else {
        piece
    }
}

fn strip_answer_suffix<'a>(piece: &'a str, answer: &str) -> &'a str {
    let answer = normalize_answer(answer);
    if answer.is_empty() {
        return piece;
    }
    for delim in ['?', '|', ':'] {
        let Some(at) = piece.rfind(delim) else {
            continue;
        };
        if tail_is_answer(&piece[at + delim.len_utf8()..], &answer) {
            let keep = if delim == '?' { at + 1 } else { at };
            return piece[..keep].trim_end();
        }
    }
    piece
}

fn tail_is_answer(tail: &str, answer: &str) -> bool {
    const DELIMS: &[char] = &[':', '|', '-', '=', ' ', '\t'];
    let mut t = tail.trim().trim_start_matches(DELIMS);
    if t.len() >= 6 && t[..6].eq_ignore_ascii_case("answer") {
        t = t[6..].trim_start_matches(DELIMS);
    }
    !t.is_empty() && normalize_answer(t) == answer
}
