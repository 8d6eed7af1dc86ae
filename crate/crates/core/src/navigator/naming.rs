//! Image naming protocol: `{self_id}_{link_id}_{role}.png`.
//!
//! `link_id` is the pair id for previous/current images and the parent id for
//! crops and derived products, so any filename carries its own lineage.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub const ID_LEN: usize = 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NamingError {
    #[error("'{0}' is not a 6-character lowercase hex id")]
    BadId(String),
    #[error("'{0}' is not a valid role token")]
    BadToken(String),
    #[error("'{0}' does not follow <id>_<link>_<role>.png")]
    BadFilename(String),
}

/// Six lowercase hex characters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ImageId(String);

impl ImageId {
    pub fn parse(s: &str) -> Result<Self, NamingError> {
        if s.len() == ID_LEN && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            Ok(Self(s.to_string()))
        } else {
            Err(NamingError::BadId(s.to_string()))
        }
    }

    pub(crate) fn from_u32(v: u32) -> Self {
        Self(format!("{:06x}", v & 0xff_ffff))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ImageId {
    type Error = NamingError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::parse(&s)
    }
}

impl From<ImageId> for String {
    fn from(id: ImageId) -> String {
        id.0
    }
}

impl fmt::Display for ImageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Temporal / processing role of an image.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ImageRole {
    Pre,
    Cur,
    CropPre,
    CropCur,
    /// Output of a processing tool, e.g. `landuse` for segmentation.
    Derived(String),
}

const RESERVED: [&str; 4] = ["pre", "cur", "crppre", "crpcur"];

impl ImageRole {
    pub fn token(&self) -> &str {
        match self {
            ImageRole::Pre => "pre",
            ImageRole::Cur => "cur",
            ImageRole::CropPre => "crppre",
            ImageRole::CropCur => "crpcur",
            ImageRole::Derived(tag) => tag,
        }
    }

    pub fn from_token(token: &str) -> Result<Self, NamingError> {
        match token {
            "pre" => Ok(ImageRole::Pre),
            "cur" => Ok(ImageRole::Cur),
            "crppre" => Ok(ImageRole::CropPre),
            "crpcur" => Ok(ImageRole::CropCur),
            tag => Self::derived(tag),
        }
    }

    /// Derived tags are lowercase alphanumerics starting with a letter and
    /// must not collide with the temporal tokens.
    pub fn derived(tag: &str) -> Result<Self, NamingError> {
        let ok = tag
            .bytes()
            .next()
            .is_some_and(|b| b.is_ascii_lowercase())
            && tag
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit())
            && !RESERVED.contains(&tag);
        if ok {
            Ok(ImageRole::Derived(tag.to_string()))
        } else {
            Err(NamingError::BadToken(tag.to_string()))
        }
    }

    pub fn is_root(&self) -> bool {
        matches!(self, ImageRole::Pre | ImageRole::Cur)
    }

    pub fn is_crop(&self) -> bool {
        matches!(self, ImageRole::CropPre | ImageRole::CropCur)
    }

    /// The crop role produced from this root role.
    pub fn crop_of(&self) -> Option<ImageRole> {
        match self {
            ImageRole::Pre => Some(ImageRole::CropPre),
            ImageRole::Cur => Some(ImageRole::CropCur),
            _ => None,
        }
    }
}

impl TryFrom<String> for ImageRole {
    type Error = NamingError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::from_token(&s)
    }
}

impl From<ImageRole> for String {
    fn from(r: ImageRole) -> String {
        r.token().to_string()
    }
}

impl fmt::Display for ImageRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

pub fn format_filename(self_id: &ImageId, link_id: &ImageId, role: &ImageRole) -> String {
    format!("{self_id}_{link_id}_{}.png", role.token())
}

pub fn parse_filename(name: &str) -> Result<(ImageId, ImageId, ImageRole), NamingError> {
    let bad = || NamingError::BadFilename(name.to_string());
    let stem = name.strip_suffix(".png").ok_or_else(bad)?;
    let mut parts = stem.splitn(3, '_');
    let (Some(a), Some(b), Some(tok)) = (parts.next(), parts.next(), parts.next()) else {
        return Err(bad());
    };
    let self_id = ImageId::parse(a).map_err(|_| bad())?;
    let link_id = ImageId::parse(b).map_err(|_| bad())?;
    let role = ImageRole::from_token(tok).map_err(|_| bad())?;
    Ok((self_id, link_id, role))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_documented_examples() {
        let be = ImageId::parse("be9519").unwrap();
        let pair = ImageId::parse("5092de").unwrap();
        assert_eq!(format_filename(&be, &pair, &ImageRole::Pre), "be9519_5092de_pre.png");
        let seg = ImageId::parse("904796").unwrap();
        let landuse = ImageRole::derived("landuse").unwrap();
        assert_eq!(format_filename(&seg, &be, &landuse), "904796_be9519_landuse.png");
        assert_eq!(
            parse_filename("904796_be9519_landuse.png").unwrap(),
            (seg, be, landuse)
        );
    }

    #[test]
    fn rejects_malformed_names() {
        for bad in [
            "be9519_5092de_pre",
            "BE9519_5092de_pre.png",
            "be951_5092de_pre.png",
            "be9519_5092de_.png",
            "be9519_5092de_Land.png",
            "be9519_5092de_land_use.png",
            "be9519.png",
        ] {
            assert!(parse_filename(bad).is_err(), "{bad}");
        }
        assert!(ImageRole::derived("crppre").is_err());
        assert!(ImageRole::derived("9tag").is_err());
    }

    #[test]
    fn crop_roles() {
        assert_eq!(ImageRole::Pre.crop_of(), Some(ImageRole::CropPre));
        assert_eq!(ImageRole::Cur.crop_of(), Some(ImageRole::CropCur));
        assert_eq!(ImageRole::CropPre.crop_of(), None);
    }
}
