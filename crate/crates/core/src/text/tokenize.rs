/// CJK ideographs are indexed one character per token; every other run is
/// split on whitespace, lowercased and stripped of leading/trailing
/// punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if is_cjk_ideograph(ch) {
            flush(&mut current, &mut tokens);
            tokens.push(ch.to_string());
        } else if ch.is_whitespace() {
            flush(&mut current, &mut tokens);
        } else {
            current.extend(ch.to_lowercase());
        }
    }
    flush(&mut current, &mut tokens);
    tokens
}

fn flush(current: &mut String, tokens: &mut Vec<String>) {
    let trimmed = current.trim_matches(|c: char| !c.is_alphanumeric());
    if !trimmed.is_empty() {
        tokens.push(trimmed.to_string());
    }
    current.clear();
}

pub fn is_cjk_ideograph(ch: char) -> bool {
    matches!(ch as u32,
        0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xF900..=0xFAFF
        | 0x20000..=0x2A6DF
        | 0x2A700..=0x2EBEF
        | 0x30000..=0x3134F
        | 0x3007)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_ideographs_per_character() {
        assert_eq!(tokenize("甲骨文 Oracle"), vec!["甲", "骨", "文", "oracle"]);
        assert_eq!(tokenize("abc中def"), vec!["abc", "中", "def"]);
    }

    #[test]
    fn trims_punctuation_and_lowercases() {
        assert_eq!(
            tokenize("See token-C07, (plate 12)."),
            vec!["see", "token-c07", "plate", "12"]
        );
        assert!(tokenize("  ... ,, ").is_empty());
    }
}
