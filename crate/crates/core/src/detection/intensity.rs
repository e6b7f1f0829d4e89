use std::fmt;

use serde::{Deserialize, Serialize};

/// Seven-level value intensity scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntensityLevel {
    StrongSupport,
    MildSupport,
    Neutral,
    MildResistance,
    StrongResistance,
    Reframing,
    NoValues,
}

impl IntensityLevel {
    pub const ALL: [IntensityLevel; 7] = [
        Self::StrongSupport,
        Self::MildSupport,
        Self::Neutral,
        Self::MildResistance,
        Self::StrongResistance,
        Self::Reframing,
        Self::NoValues,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Self::StrongSupport => "strong_support",
            Self::MildSupport => "mild_support",
            Self::Neutral => "neutral",
            Self::MildResistance => "mild_resistance",
            Self::StrongResistance => "strong_resistance",
            Self::Reframing => "reframing",
            Self::NoValues => "no_values",
        }
    }

    pub fn glyph(self) -> &'static str {
        match self {
            Self::StrongSupport => "+ + +",
            Self::MildSupport => "+",
            Self::Neutral => "o",
            Self::MildResistance => "--",
            Self::StrongResistance => "-- -- --",
            Self::Reframing => "±",
            Self::NoValues => "∅",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::StrongSupport => "Strong support",
            Self::MildSupport => "Mild support",
            Self::Neutral => "Neutral",
            Self::MildResistance => "Mild resistance",
            Self::StrongResistance => "Strong resistance",
            Self::Reframing => "Reframing",
            Self::NoValues => "No values",
        }
    }

    /// Grading guidance given to the rating model.
    pub fn definition(self) -> &'static str {
        match self {
            Self::StrongSupport => "The text fervently promotes and defends the value, emphasising its importance. This value is central to the message, backed by emotional, moral, and logical urgency.",
            Self::MildSupport => "The text aligns with the value through positive mention or subtle endorsement, without significant detail, insistence, or emphasis.",
            Self::Neutral => "The text presents the value neutrally without showing clear support or opposition. The tone is factual, balanced, and incidental.",
            Self::MildResistance => "The text subtly questions, downplays, or presents alternative perspectives on its value. This opposition is indirect, cautious, or expressed through mild scepticism.",
            Self::StrongResistance => "The text challenges, criticises, or undermines its value directly and forcefully. This includes explicit arguments, a negative emotional tone, or repeated rejections.",
            Self::Reframing => "The text acknowledges its value but shifts its meaning and context, introducing a new perspective that changes the emphasis without openly expressing support or opposition.",
            Self::NoValues => "The text is factual or technical in nature and does not contain evaluative statements.",
        }
    }

    /// Accepts a token (case-insensitive) or a glyph; surrounding whitespace
    /// is ignored and inner whitespace runs count as one space. Anything else
    /// is rejected.
    pub fn parse(raw: &str) -> Option<Self> {
        let collapsed = raw.split_whitespace().collect::<Vec<_>>().join(" ");
        let lowered = collapsed.to_lowercase();
        Self::ALL
            .into_iter()
            .find(|l| l.token() == lowered || l.glyph() == collapsed)
    }

    /// The scale as rendered into the rating prompt.
    pub fn scale_text() -> String {
        Self::ALL
            .iter()
            .map(|l| format!("- [{}] ({}) {}: {}", l.token(), l.glyph(), l.label(), l.definition()))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

impl fmt::Display for IntensityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.glyph(), self.label())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn glyph_table() {
        let glyphs: Vec<_> = IntensityLevel::ALL.iter().map(|l| l.glyph()).collect();
        assert_eq!(glyphs, ["+ + +", "+", "o", "--", "-- -- --", "±", "∅"]);
    }

    #[test]
    fn tokens_and_glyphs_parse() {
        for level in IntensityLevel::ALL {
            assert_eq!(IntensityLevel::parse(level.token()), Some(level));
            assert_eq!(IntensityLevel::parse(level.glyph()), Some(level));
            assert_eq!(IntensityLevel::parse(&level.token().to_uppercase()), Some(level));
            let json = serde_json::to_string(&level).unwrap();
            assert_eq!(json, format!("\"{}\"", level.token()));
        }
        assert_eq!(IntensityLevel::parse("  +  +   + "), Some(IntensityLevel::StrongSupport));
    }

    #[test]
    fn near_misses_rejected() {
        for raw in ["", "+++", "strong support", "Mild resistance (--)", "-", "0", "O", "++", "no values"] {
            assert_eq!(IntensityLevel::parse(raw), None, "{raw:?}");
        }
    }

    #[test]
    fn scale_lists_every_level_once() {
        let text = IntensityLevel::scale_text();
        assert_eq!(text.lines().count(), 7);
        for level in IntensityLevel::ALL {
            assert!(text.contains(&format!("[{}]", level.token())));
        }
    }

    fn accepted_forms() -> Vec<String> {
        IntensityLevel::ALL
            .iter()
            .flat_map(|l| [l.token().to_string(), l.glyph().to_string()])
            .collect()
    }

    proptest! {
        #[test]
        fn padded_forms_are_accepted(
            idx in 0usize..7,
            use_glyph in any::<bool>(),
            upper in any::<bool>(),
            pre in "[ \t\n]{0,3}",
            post in "[ \t\n]{0,3}",
        ) {
            let level = IntensityLevel::ALL[idx];
            let core = if use_glyph {
                level.glyph().to_string()
            } else if upper {
                level.token().to_uppercase()
            } else {
                level.token().to_string()
            };
            prop_assert_eq!(IntensityLevel::parse(&format!("{pre}{core}{post}")), Some(level));
        }

        #[test]
        fn everything_else_is_rejected(raw in "[a-z_+o± ∅-]{0,18}") {
            let collapsed = raw.split_whitespace().collect::<Vec<_>>().join(" ");
            prop_assume!(!accepted_forms().contains(&collapsed));
            prop_assert_eq!(IntensityLevel::parse(&raw), None);
        }
    }
}
