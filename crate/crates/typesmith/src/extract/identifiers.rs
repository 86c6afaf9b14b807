//! Identifier normalization: split, lowercase, lemmatize.

/// Split an identifier into lowercased word pieces.
///
/// Boundaries: underscores, camel-case transitions (including acronym runs,
/// so `HTMLParserBase` gives `html parser base`), and letter/digit
/// transitions. Each piece is passed through a small rule-based plural
/// reducer. Never returns an empty sequence: unsplittable names pass
/// through lowercased.
pub fn normalize_identifier(name: &str) -> Vec<String> {
    let mut words = Vec::new();
    for chunk in name.split('_') {
        if chunk.is_empty() {
            continue;
        }
        for piece in split_camel(chunk) {
            let w = lemmatize(&piece.to_lowercase());
            if !w.is_empty() {
                words.push(w);
            }
        }
    }
    if words.is_empty() {
        words.push(name.to_lowercase());
    }
    words
}

fn split_camel(chunk: &str) -> Vec<String> {
    let chars: Vec<char> = chunk.chars().collect();
    let mut pieces = Vec::new();
    let mut cur = String::new();
    for i in 0..chars.len() {
        let c = chars[i];
        if !cur.is_empty() {
            let prev = *cur.chars().last().as_ref().unwrap();
            let boundary =
                // lower or digit followed by upper: fooBar, x2Y
                ((prev.is_lowercase() || prev.is_ascii_digit()) && c.is_uppercase())
                // acronym end: HTMLParser -> HTML | Parser
                || (prev.is_uppercase()
                    && c.is_uppercase()
                    && chars.get(i + 1).map(|n| n.is_lowercase()).unwrap_or(false))
                // letter/digit transition
                || (prev.is_ascii_digit() != c.is_ascii_digit()
                    && (prev.is_ascii_digit() || c.is_ascii_digit()));
            if boundary {
                pieces.push(std::mem::take(&mut cur));
            }
        }
        cur.push(c);
    }
    if !cur.is_empty() {
        pieces.push(cur);
    }
    pieces
}

/// Deterministic plural reducer: `-ies` -> `y`, `-es` after a sibilant is
/// dropped, a trailing `-s` is dropped unless the word ends in `ss`, `us`,
/// or `is`. No verb handling.
fn lemmatize(word: &str) -> String {
    let n = word.len();
    if n > 3 && word.ends_with("ies") {
        return format!("{}y", &word[..n - 3]);
    }
    if n > 3 && word.ends_with("es") {
        let stem = &word[..n - 2];
        if stem.ends_with('s')
            || stem.ends_with('x')
            || stem.ends_with('z')
            || stem.ends_with("ch")
            || stem.ends_with("sh")
        {
            return stem.to_string();
        }
    }
    if n > 2 && word.ends_with('s') && !word.ends_with("ss") && !word.ends_with("us") && !word.ends_with("is")
    {
        return word[..n - 1].to_string();
    }
    word.to_string()
}

/// Split a comment/docstring into lowercased words on whitespace and
/// punctuation. No lemmatization.
pub fn comment_words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn snake_case_splits() {
        assert_eq!(normalize_identifier("do_propagate"), vec!["do", "propagate"]);
    }

    #[test]
    fn single_letter_passes_through() {
        assert_eq!(normalize_identifier("x"), vec!["x"]);
    }

    #[test]
    fn camel_case_with_acronym() {
        assert_eq!(
            normalize_identifier("HTMLParserBase"),
            vec!["html", "parser", "base"]
        );
    }

    #[test]
    fn digit_boundaries_split() {
        assert_eq!(normalize_identifier("utf8Name"), vec!["utf", "8", "name"]);
    }

    #[test]
    fn plural_rules() {
        assert_eq!(normalize_identifier("names"), vec!["name"]);
        assert_eq!(normalize_identifier("classes"), vec!["class"]);
        assert_eq!(normalize_identifier("entries"), vec!["entry"]);
        assert_eq!(normalize_identifier("boxes"), vec!["box"]);
        assert_eq!(normalize_identifier("status"), vec!["status"]);
        assert_eq!(normalize_identifier("axis"), vec!["axis"]);
    }

    #[test]
    fn underscores_only_pass_through() {
        assert_eq!(normalize_identifier("__"), vec!["__"]);
    }

    #[test]
    fn comment_splitting() {
        assert_eq!(
            comment_words("Update the name, (optionally) propagate."),
            vec!["update", "the", "name", "optionally", "propagate"]
        );
    }

    proptest! {
        #[test]
        fn never_empty_and_always_lowercase(name in "[A-Za-z_][A-Za-z0-9_]{0,20}") {
            let words = normalize_identifier(&name);
            prop_assert!(!words.is_empty());
            for w in words {
                prop_assert_eq!(w.to_lowercase(), w);
            }
        }

        #[test]
        fn deterministic(name in "[A-Za-z_][A-Za-z0-9_]{0,20}") {
            prop_assert_eq!(normalize_identifier(&name), normalize_identifier(&name));
        }
    }
}
