use std::collections::HashMap;

use super::ValueTheory;

/// Folds a label for comparison: lowercase, hyphens/underscores/dashes as
/// spaces, whitespace runs collapsed.
pub fn normalize_label(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    for ch in raw.chars() {
        let ch = match ch {
            '-' | '_' | '\u{2010}' | '\u{2011}' | '\u{2012}' | '\u{2013}' | '\u{2014}' => ' ',
            c => c,
        };
        if ch.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.extend(ch.to_lowercase());
    }
    out
}

/// Lookup tables from normalised ids and names to canonical value ids.
#[derive(Debug, Clone)]
pub struct LabelIndex {
    by_id: HashMap<String, String>,
    by_name: HashMap<String, String>,
}

impl LabelIndex {
    pub fn new(theory: &ValueTheory) -> Self {
        let mut by_id = HashMap::new();
        let mut by_name = HashMap::new();
        // First occurrence wins so that a malformed theory still resolves
        // deterministically.
        for v in &theory.values {
            by_id
                .entry(normalize_label(&v.value_id))
                .or_insert_with(|| v.value_id.clone());
            by_name
                .entry(normalize_label(&v.name))
                .or_insert_with(|| v.value_id.clone());
        }
        Self { by_id, by_name }
    }

    /// Resolves an id, a name, or a `Name (ID)` composite.
    ///
    /// Ids are tried before names. In a composite the parenthesised id is
    /// authoritative; the name part is only consulted when the id is unknown.
    pub fn resolve(&self, raw: &str) -> Option<&str> {
        let key = normalize_label(raw);
        if key.is_empty() {
            return None;
        }
        if let Some(id) = self.by_id.get(&key).or_else(|| self.by_name.get(&key)) {
            return Some(id);
        }
        let (name, id) = split_composite(raw.trim())?;
        self.by_id
            .get(&normalize_label(id))
            .or_else(|| self.by_name.get(&normalize_label(name)))
            .map(String::as_str)
    }
}

fn split_composite(raw: &str) -> Option<(&str, &str)> {
    let inner_end = raw.strip_suffix(')')?;
    let open = inner_end.rfind('(')?;
    let name = inner_end[..open].trim();
    let id = inner_end[open + 1..].trim();
    if id.is_empty() {
        return None;
    }
    Some((name, id))
}

/// Maps a free-form label onto a value id of `theory`, or `None` when the
/// label matches nothing.
pub fn canonicalize_label(raw: &str, theory: &ValueTheory) -> Option<String> {
    LabelIndex::new(theory).resolve(raw).map(str::to_string)
}
