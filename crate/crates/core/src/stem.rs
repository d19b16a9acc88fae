//! Suffix-stripping stemmer for relation verbs.

/// Stems that regain a final `e` after `-ing`, `-ed` or `-es` is removed
/// ("causes" -> "caus" -> "cause").
const SILENT_E_STEMS: &[&str] = &[
    "accelerat",
    "activat",
    "aggravat",
    "alleviat",
    "ameliorat",
    "antagoniz",
    "associat",
    "attenuat",
    "caus",
    "combin",
    "contribut",
    "cur",
    "damag",
    "decreas",
    "degrad",
    "deplet",
    "diagnos",
    "downregulat",
    "elevat",
    "encod",
    "enhanc",
    "exacerbat",
    "facilitat",
    "generat",
    "improv",
    "increas",
    "induc",
    "influenc",
    "involv",
    "mediat",
    "modulat",
    "phosphorylat",
    "predispos",
    "produc",
    "promot",
    "provok",
    "reduc",
    "regulat",
    "relat",
    "releas",
    "restor",
    "secret",
    "sensitiz",
    "stimulat",
    "translat",
    "upregulat",
];

const IRREGULAR: &[(&str, &str)] = &[("led", "lead"), ("bound", "bind")];

/// Reduces a lowercase word to its stem. The first applicable rule wins:
/// `ies`/`ied` -> `y`, `ing` -> "", `ed` -> "", `es` -> "", `s` -> "" (not
/// after another `s`). Stripping `ing`/`ed`/`es` restores a silent `e` for
/// listed stems and undoubles a trailing doubled consonant.
pub fn stem(word: &str) -> String {
    if let Some(&(_, base)) = IRREGULAR.iter().find(|(w, _)| *w == word) {
        return base.to_string();
    }
    for suffix in ["ies", "ied"] {
        if let Some(root) = word.strip_suffix(suffix) {
            if root.len() >= 2 {
                return format!("{root}y");
            }
        }
    }
    for suffix in ["ing", "ed"] {
        if let Some(root) = word.strip_suffix(suffix) {
            if root.chars().count() >= 3 && root.chars().any(is_vowel) {
                return restore(root);
            }
        }
    }
    if let Some(root) = word.strip_suffix("es") {
        if root.len() >= 2 {
            return restore_e(root).unwrap_or_else(|| root.to_string());
        }
    }
    if let Some(root) = word.strip_suffix('s') {
        if root.len() >= 2 && !root.ends_with('s') {
            return root.to_string();
        }
    }
    word.to_string()
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

fn restore_e(root: &str) -> Option<String> {
    SILENT_E_STEMS.binary_search(&root).ok().map(|_| format!("{root}e"))
}

fn restore(root: &str) -> String {
    if let Some(e) = restore_e(root) {
        return e;
    }
    let bytes = root.as_bytes();
    let n = bytes.len();
    if n >= 2 && bytes[n - 1] == bytes[n - 2] && !b"aeioulsz".contains(&bytes[n - 1]) {
        return root[..n - 1].to_string();
    }
    root.to_string()
}
