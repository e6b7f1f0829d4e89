//! Data shipped with the crate: the 19-value Schwartz fixture theory, the
//! running-example text and a seeded generator of random valid theories.

use crate::eval::SplitMix64;
use crate::value_spec::{deserialize_theory, ManifestEntry, ValueSpec, ValueTheory};

/// Canonical JSON of the Schwartz refined-theory fixture.
pub const SCHWARTZ_THEORY_JSON: &str = include_str!("../data/schwartz19.json");

/// Sample text analysed end to end in the documentation and tests.
pub const RUNNING_EXAMPLE_TEXT: &str = "Climbing the corporate ladder used to be my goal, but I've realised that personal fulfillment matters more than titles or paychecks. Success is now about balance and happiness.";

pub fn schwartz_theory() -> ValueTheory {
    deserialize_theory(SCHWARTZ_THEORY_JSON).expect("shipped fixture theory parses")
}

const WORDS: &[&str] = &[
    "care", "loyalty", "rules", "power", "wealth", "pleasure", "risk", "nature", "tradition",
    "humility", "curiosity", "order", "safety", "honour", "équité", "自由", "düzen", "\"quoted\"",
    "back\\slash", "tab\there", "line\nbreak", "emoji 🌱", "",
];

/// Builds a valid theory from `seed`. Strings mix non-ASCII text, quotes,
/// backslashes and control characters so codec round trips are exercised.
pub fn random_theory(seed: u64) -> ValueTheory {
    let mut rng = SplitMix64::new(seed);
    let value_count = 1 + rng.below(24);
    let values = (0..value_count)
        .map(|i| ValueSpec {
            value_id: format!("V{i}_{:x}", rng.below(1 << 16)),
            name: phrase(&mut rng, 1),
            description: phrase(&mut rng, 3),
            group: match rng.below(3) {
                0 => None,
                _ => Some(phrase(&mut rng, 1)),
            },
            tags: distinct(&mut rng, "t", 4),
            examples: distinct(&mut rng, "e", 3),
        })
        .collect();
    let source_manifest = (0..rng.below(4))
        .map(|k| ManifestEntry {
            document: format!("doc_{k}.md"),
            digest: format!("{:016x}{:016x}{:016x}{:016x}", rng.next_u64(), rng.next_u64(), rng.next_u64(), rng.next_u64()),
        })
        .collect();
    ValueTheory {
        theory_id: format!("theory-{seed:x}"),
        name: phrase(&mut rng, 2),
        version: 1 + rng.below(1000),
        source_manifest,
        values,
        revised_by_expert: rng.below(2) == 1,
    }
}

fn phrase(rng: &mut SplitMix64, min: u64) -> String {
    let len = min + rng.below(5);
    let words: Vec<&str> = (0..len)
        .map(|_| WORDS[rng.below(WORDS.len() as u64) as usize])
        .collect();
    let joined = words.join(" ");
    if joined.trim().is_empty() {
        "placeholder".to_string()
    } else {
        joined
    }
}

/// Between one and `max` items, made unique by an index prefix.
fn distinct(rng: &mut SplitMix64, prefix: &str, max: u64) -> Vec<String> {
    let n = 1 + rng.below(max);
    (0..n).map(|k| format!("{prefix}{k} {}", phrase(rng, 1))).collect()
}
