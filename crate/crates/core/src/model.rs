//! Vocabulary shared by the fixture renderer and the normalizer.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
    Unspecified,
}

impl Gender {
    pub const ALL: [Gender; 3] = [Gender::Male, Gender::Female, Gender::Unspecified];

    pub fn label(self) -> &'static str {
        match self {
            Gender::Male => "Male",
            Gender::Female => "Female",
            Gender::Unspecified => "Unspecified",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|g| g.label().eq_ignore_ascii_case(s.trim()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relationship {
    Single,
    InARelationship,
    Engaged,
    Married,
    Complicated,
}

impl Relationship {
    pub const ALL: [Relationship; 5] = [
        Relationship::Single,
        Relationship::InARelationship,
        Relationship::Engaged,
        Relationship::Married,
        Relationship::Complicated,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Relationship::Single => "Single",
            Relationship::InARelationship => "In a relationship",
            Relationship::Engaged => "Engaged",
            Relationship::Married => "Married",
            Relationship::Complicated => "It's complicated",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.label().eq_ignore_ascii_case(s.trim()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostType {
    Text,
    Photo,
    Video,
    Link,
}

impl PostType {
    pub const ALL: [PostType; 4] = [PostType::Text, PostType::Photo, PostType::Video, PostType::Link];

    pub fn as_str(self) -> &'static str {
        match self {
            PostType::Text => "text",
            PostType::Photo => "photo",
            PostType::Video => "video",
            PostType::Link => "link",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
    }
}

impl fmt::Display for PostType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Closed set of per-post emotion kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactionKind {
    Like,
    Love,
    Haha,
    Wow,
    Sad,
    Angry,
}

impl ReactionKind {
    pub const ALL: [ReactionKind; 6] = [
        ReactionKind::Like,
        ReactionKind::Love,
        ReactionKind::Haha,
        ReactionKind::Wow,
        ReactionKind::Sad,
        ReactionKind::Angry,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReactionKind::Like => "like",
            ReactionKind::Love => "love",
            ReactionKind::Haha => "haha",
            ReactionKind::Wow => "wow",
            ReactionKind::Sad => "sad",
            ReactionKind::Angry => "angry",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// Personal attributes subject to a per-field disclosure decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Gender,
    Birthday,
    Email,
    Phone,
    RelationshipStatus,
    Hometown,
    CurrentCity,
    FamilyMembers,
    PagesLiked,
    GroupsJoined,
}

impl Attribute {
    pub const ALL: [Attribute; 10] = [
        Attribute::Gender,
        Attribute::Birthday,
        Attribute::Email,
        Attribute::Phone,
        Attribute::RelationshipStatus,
        Attribute::Hometown,
        Attribute::CurrentCity,
        Attribute::FamilyMembers,
        Attribute::PagesLiked,
        Attribute::GroupsJoined,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Gender => "gender",
            Attribute::Birthday => "birthday",
            Attribute::Email => "email",
            Attribute::Phone => "phone",
            Attribute::RelationshipStatus => "relationship_status",
            Attribute::Hometown => "hometown",
            Attribute::CurrentCity => "current_city",
            Attribute::FamilyMembers => "family_members",
            Attribute::PagesLiked => "pages_liked",
            Attribute::GroupsJoined => "groups_joined",
        }
    }

    pub fn is_list(self) -> bool {
        matches!(
            self,
            Attribute::FamilyMembers | Attribute::PagesLiked | Attribute::GroupsJoined
        )
    }

    /// About-page section the attribute is rendered in.
    pub fn section(self) -> Section {
        match self {
            Attribute::Gender | Attribute::Birthday | Attribute::Email | Attribute::Phone => {
                Section::BasicInformation
            }
            Attribute::Hometown | Attribute::CurrentCity => Section::PlacesLived,
            Attribute::RelationshipStatus | Attribute::FamilyMembers => {
                Section::FamilyAndRelationship
            }
            Attribute::PagesLiked => Section::PagesLiked,
            Attribute::GroupsJoined => Section::GroupsJoined,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }
}

/// About-page sections, in page order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    BasicInformation,
    PlacesLived,
    FamilyAndRelationship,
    FriendCount,
    PagesLiked,
    GroupsJoined,
}

impl Section {
    pub const ALL: [Section; 6] = [
        Section::BasicInformation,
        Section::PlacesLived,
        Section::FamilyAndRelationship,
        Section::FriendCount,
        Section::PagesLiked,
        Section::GroupsJoined,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Section::BasicInformation => "basic_information",
            Section::PlacesLived => "places_lived",
            Section::FamilyAndRelationship => "family_and_relationship",
            Section::FriendCount => "friend_count",
            Section::PagesLiked => "pages_liked",
            Section::GroupsJoined => "groups_joined",
        }
    }

    pub fn element_id(self) -> &'static str {
        match self {
            Section::BasicInformation => "basic-information",
            Section::PlacesLived => "places-lived",
            Section::FamilyAndRelationship => "family-and-relationship",
            Section::FriendCount => "friend-count",
            Section::PagesLiked => "pages-liked",
            Section::GroupsJoined => "groups-joined",
        }
    }
}

pub const DATE_FORMAT: &str = "%-d %B %Y";
pub const TIME_FORMAT: &str = "%H:%M";

/// Renders a count the way profile pages display it.
///
/// Values below 1000 are plain digits. `K` (×1000) and `M` (×1,000,000)
/// with at most one decimal are used only when they are exact, so
/// [`parse_count`] always recovers the original value.
pub fn format_count(n: u64) -> String {
    fn scaled(n: u64, unit: u64, suffix: char) -> String {
        let tenths = n / (unit / 10);
        if tenths % 10 == 0 {
            format!("{}{}", tenths / 10, suffix)
        } else {
            format!("{}.{}{}", tenths / 10, tenths % 10, suffix)
        }
    }
    if n >= 1_000_000 && n % 100_000 == 0 {
        scaled(n, 1_000_000, 'M')
    } else if (1_000..1_000_000).contains(&n) && n % 100 == 0 {
        scaled(n, 1_000, 'K')
    } else {
        n.to_string()
    }
}

/// Parses plain or abbreviated counts (`"42"`, `"1,234"`, `"1.2K"`, `"3M"`).
///
/// Suffixes multiply by 1000 / 1,000,000; fractional results round half up.
pub fn parse_count(s: &str) -> Option<u64> {
    let s = s.trim();
    let (digits, unit) = match s.chars().last()? {
        'K' | 'k' => (&s[..s.len() - 1], 1_000u64),
        'M' | 'm' => (&s[..s.len() - 1], 1_000_000u64),
        _ => (s, 1),
    };
    let digits: String = digits.chars().filter(|c| *c != ',').collect();
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits.as_str(), ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return None;
    }
    if unit == 1 && !frac_part.is_empty() {
        return None;
    }
    let int_value: u64 = if int_part.is_empty() { 0 } else { int_part.parse().ok()? };
    let mut value = int_value.checked_mul(unit)?;
    if !frac_part.is_empty() {
        // frac * unit / 10^len, rounded half up, in integer arithmetic.
        let frac: u128 = frac_part.parse().ok()?;
        let denom = 10u128.checked_pow(frac_part.len() as u32)?;
        let scaled = frac * unit as u128;
        let rounded = (scaled * 2 + denom) / (denom * 2);
        value = value.checked_add(u64::try_from(rounded).ok()?)?;
    }
    Some(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn abbreviated_counts() {
        assert_eq!(parse_count("1.2K"), Some(1200));
        assert_eq!(parse_count("3M"), Some(3_000_000));
        assert_eq!(parse_count("2.5m"), Some(2_500_000));
        assert_eq!(parse_count("1.25K"), Some(1250));
        assert_eq!(parse_count("1.2345K"), Some(1235));
        assert_eq!(parse_count("1.2344K"), Some(1234));
        assert_eq!(parse_count("1,234"), Some(1234));
        assert_eq!(parse_count(" 17 "), Some(17));
        assert_eq!(parse_count("banana"), None);
        assert_eq!(parse_count(""), None);
        assert_eq!(parse_count("K"), None);
        assert_eq!(parse_count("1.5"), None);
    }

    #[test]
    fn display_forms() {
        assert_eq!(format_count(999), "999");
        assert_eq!(format_count(1200), "1.2K");
        assert_eq!(format_count(1000), "1K");
        assert_eq!(format_count(1234), "1234");
        assert_eq!(format_count(3_400_000), "3.4M");
        assert_eq!(format_count(3_450_000), "3450000");
        assert_eq!(format_count(999_900), "999.9K");
    }

    proptest! {
        #[test]
        fn format_then_parse_is_identity(n in 0u64..50_000_000) {
            prop_assert_eq!(parse_count(&format_count(n)), Some(n));
        }

        #[test]
        fn hundreds_round_trip(k in 10u64..10_000) {
            let n = k * 100;
            prop_assert_eq!(parse_count(&format_count(n)), Some(n));
        }
    }

    #[test]
    fn labels_round_trip() {
        for g in Gender::ALL {
            assert_eq!(Gender::from_label(g.label()), Some(g));
        }
        for r in Relationship::ALL {
            assert_eq!(Relationship::from_label(r.label()), Some(r));
        }
        for t in PostType::ALL {
            assert_eq!(PostType::parse(t.as_str()), Some(t));
        }
    }
}
