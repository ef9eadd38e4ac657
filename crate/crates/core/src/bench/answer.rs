//! Regular-expression answer extraction.
//!
//! | grammar       | accepts                                                     |
//! |---------------|-------------------------------------------------------------|
//! | `YesNo`       | standalone `yes`/`no`, any case; both present is a conflict |
//! | `Option`      | standalone capital letter `A`-`D`; two different is a conflict |
//! | `Integer`     | standalone integers; two different values is a conflict; decimals and out-of-range values are invalid |
//! | `Boxes`       | every `[a, b, c, d]` tuple of non-negative integers; a bare `[]` means none |
//! | `Items`       | the JSON array of strings in the reply; two different arrays is a conflict |
//!
//! Generation answers are images and bypass text extraction.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::raster::RasterImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "grammar", rename_all = "kebab-case")]
pub enum AnswerGrammar {
    YesNo,
    /// Option letters from `A` up to `last`.
    Option { last: char },
    /// Integer within `[0, max]` (unbounded when `max` is `None`).
    Integer { max: Option<i64> },
    Boxes,
    Items,
    Image,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "kebab-case")]
pub enum ParsedAnswer {
    YesNo(bool),
    Option(char),
    Integer(i64),
    Boxes(Vec<[u32; 4]>),
    Items(Vec<String>),
    Image(RasterImage),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidAnswer {
    NoMatch,
    Conflicting,
    OutOfRange,
    NotAnImage,
}

impl std::fmt::Display for InvalidAnswer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InvalidAnswer::NoMatch => "no answer found",
            InvalidAnswer::Conflicting => "conflicting answers",
            InvalidAnswer::OutOfRange => "answer out of range",
            InvalidAnswer::NotAnImage => "expected an image",
        })
    }
}

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("static pattern"))
}

static YES_NO: OnceLock<Regex> = OnceLock::new();
static LETTER: OnceLock<Regex> = OnceLock::new();
static NUMBER: OnceLock<Regex> = OnceLock::new();
static BOX: OnceLock<Regex> = OnceLock::new();
static EMPTY_LIST: OnceLock<Regex> = OnceLock::new();
static ARRAY: OnceLock<Regex> = OnceLock::new();

/// Parses a text reply. See the module table for the per-grammar rules.
pub fn extract_answer(raw: &str, grammar: AnswerGrammar) -> Result<ParsedAnswer, InvalidAnswer> {
    match grammar {
        AnswerGrammar::YesNo => {
            let mut found: Option<bool> = None;
            for m in re(&YES_NO, r"(?i)\b(yes|no)\b").find_iter(raw) {
                let v = m.as_str().eq_ignore_ascii_case("yes");
                match found {
                    Some(prev) if prev != v => return Err(InvalidAnswer::Conflicting),
                    _ => found = Some(v),
                }
            }
            found.map(ParsedAnswer::YesNo).ok_or(InvalidAnswer::NoMatch)
        }
        AnswerGrammar::Option { last } => {
            let mut found: Option<char> = None;
            for m in re(&LETTER, r"\b([A-Z])\b").find_iter(raw) {
                let c = m.as_str().chars().next().expect("one letter");
                if c > last {
                    continue;
                }
                match found {
                    Some(prev) if prev != c => return Err(InvalidAnswer::Conflicting),
                    _ => found = Some(c),
                }
            }
            found.map(ParsedAnswer::Option).ok_or(InvalidAnswer::NoMatch)
        }
        AnswerGrammar::Integer { max } => {
            let mut found: Option<i64> = None;
            for m in re(&NUMBER, r"(?:^|[^\w.])(-?\d+(?:\.\d+)?)\b").captures_iter(raw) {
                let text = &m[1];
                if text.contains('.') {
                    return Err(InvalidAnswer::OutOfRange);
                }
                let v: i64 = text.parse().map_err(|_| InvalidAnswer::OutOfRange)?;
                match found {
                    Some(prev) if prev != v => return Err(InvalidAnswer::Conflicting),
                    _ => found = Some(v),
                }
            }
            let v = found.ok_or(InvalidAnswer::NoMatch)?;
            if v < 0 || max.is_some_and(|m| v > m) {
                return Err(InvalidAnswer::OutOfRange);
            }
            Ok(ParsedAnswer::Integer(v))
        }
        AnswerGrammar::Boxes => {
            let pattern = re(&BOX, r"\[\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\]");
            let mut boxes = Vec::new();
            for c in pattern.captures_iter(raw) {
                let mut b = [0u32; 4];
                for (i, slot) in b.iter_mut().enumerate() {
                    *slot = c[i + 1].parse().map_err(|_| InvalidAnswer::OutOfRange)?;
                }
                boxes.push(b);
            }
            if boxes.is_empty() && !re(&EMPTY_LIST, r"\[\s*\]").is_match(raw) {
                return Err(InvalidAnswer::NoMatch);
            }
            Ok(ParsedAnswer::Boxes(boxes))
        }
        AnswerGrammar::Items => {
            let mut found: Option<Vec<String>> = None;
            for m in re(&ARRAY, r#"\[(?:\s*"(?:[^"\\]|\\.)*"\s*(?:,\s*"(?:[^"\\]|\\.)*"\s*)*)?\]"#)
                .find_iter(raw)
            {
                let items: Vec<String> =
                    serde_json::from_str(m.as_str()).map_err(|_| InvalidAnswer::NoMatch)?;
                match &found {
                    Some(prev) if *prev != items => return Err(InvalidAnswer::Conflicting),
                    _ => found = Some(items),
                }
            }
            found.map(ParsedAnswer::Items).ok_or(InvalidAnswer::NoMatch)
        }
        AnswerGrammar::Image => Err(InvalidAnswer::NotAnImage),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_examples() {
        assert_eq!(extract_answer("Yes", AnswerGrammar::YesNo), Ok(ParsedAnswer::YesNo(true)));
        assert_eq!(
            extract_answer("The probability is 85.", AnswerGrammar::Integer { max: Some(100) }),
            Ok(ParsedAnswer::Integer(85))
        );
        assert_eq!(
            extract_answer("Boxes: [12, 30, 88, 140] and [5,5,20,40]", AnswerGrammar::Boxes),
            Ok(ParsedAnswer::Boxes(vec![[12, 30, 88, 140], [5, 5, 20, 40]]))
        );
    }

    #[test]
    fn image_grammar_never_parses_text() {
        assert_eq!(extract_answer("here", AnswerGrammar::Image), Err(InvalidAnswer::NotAnImage));
    }
}
