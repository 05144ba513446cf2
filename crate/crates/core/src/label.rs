use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Panel condition classes. Integer codes follow the dataset summary table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    Clean,
    SnowCovered,
    Dusty,
    ElectricalFault,
    PhysicalDamage,
    BirdDroppings,
}

impl ClassLabel {
    pub const COUNT: usize = 6;

    pub const ALL: [ClassLabel; Self::COUNT] = [
        ClassLabel::Clean,
        ClassLabel::SnowCovered,
        ClassLabel::Dusty,
        ClassLabel::ElectricalFault,
        ClassLabel::PhysicalDamage,
        ClassLabel::BirdDroppings,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Clean => "clean",
            ClassLabel::SnowCovered => "snow_covered",
            ClassLabel::Dusty => "dusty",
            ClassLabel::ElectricalFault => "electrical_fault",
            ClassLabel::PhysicalDamage => "physical_damage",
            ClassLabel::BirdDroppings => "bird_droppings",
        }
    }

    /// Maps a class directory name to a label.
    ///
    /// Matching ignores case and punctuation and accepts the directory names
    /// used by the public dataset (`Bird-drop`, `Electrical-damage`,
    /// `Physical-Damage`, `Snow-Covered`, ...).
    ///
    /// | normalised prefix | label |
    /// |---|---|
    /// | `clean` | Clean |
    /// | `snow` | SnowCovered |
    /// | `dust` | Dusty |
    /// | `electric` | ElectricalFault |
    /// | `physical` | PhysicalDamage |
    /// | `bird` | BirdDroppings |
    pub fn from_dir_name(name: &str) -> Option<Self> {
        let norm: String = name.chars().filter(char::is_ascii_alphanumeric).map(|c| c.to_ascii_lowercase()).collect();
        const PREFIXES: [(&str, ClassLabel); 6] = [
            ("clean", ClassLabel::Clean),
            ("snow", ClassLabel::SnowCovered),
            ("dust", ClassLabel::Dusty),
            ("electric", ClassLabel::ElectricalFault),
            ("physical", ClassLabel::PhysicalDamage),
            ("bird", ClassLabel::BirdDroppings),
        ];
        PREFIXES.iter().find(|(p, _)| norm.starts_with(p)).map(|&(_, l)| l)
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown class label {0:?}")]
pub struct UnknownLabel(pub String);

impl FromStr for ClassLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|l| l.name() == s)
            .or_else(|| Self::from_dir_name(s))
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_stable() {
        for (i, l) in ClassLabel::ALL.iter().enumerate() {
            assert_eq!(l.code(), i);
            assert_eq!(ClassLabel::from_code(i), Some(*l));
        }
        assert_eq!(ClassLabel::from_code(6), None);
        assert_eq!(ClassLabel::Clean.code(), 0);
        assert_eq!(ClassLabel::BirdDroppings.code(), 5);
    }

    #[test]
    fn dataset_directory_names() {
        assert_eq!(ClassLabel::from_dir_name("Bird-drop"), Some(ClassLabel::BirdDroppings));
        assert_eq!(ClassLabel::from_dir_name("Electrical-damage"), Some(ClassLabel::ElectricalFault));
        assert_eq!(ClassLabel::from_dir_name("Physical-Damage"), Some(ClassLabel::PhysicalDamage));
        assert_eq!(ClassLabel::from_dir_name("Snow-Covered"), Some(ClassLabel::SnowCovered));
        assert_eq!(ClassLabel::from_dir_name("Dusty"), Some(ClassLabel::Dusty));
        assert_eq!(ClassLabel::from_dir_name("clean"), Some(ClassLabel::Clean));
        assert_eq!(ClassLabel::from_dir_name("misc"), None);
    }

    #[test]
    fn parse_and_display_agree() {
        for l in ClassLabel::ALL {
            assert_eq!(l.to_string().parse::<ClassLabel>().unwrap(), l);
        }
        assert!("nope".parse::<ClassLabel>().is_err());
    }
}
