use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::InferenceError;

/// Length of every per-instance clip and footage embedding.
pub const EMBEDDING_DIM: usize = 192;

/// X3D instance, ordered by size. The derived `Ord` is the canonical fusion order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InstanceName {
    XS,
    S,
    M,
    L,
}

impl InstanceName {
    pub const ALL: [InstanceName; 4] = [Self::XS, Self::S, Self::M, Self::L];

    /// `(frames per clip, sampling rate)` of the published instance.
    pub const fn clip_geometry(self) -> (usize, usize) {
        match self {
            Self::XS => (4, 12),
            Self::S => (4, 12),
            Self::M => (13, 6),
            Self::L => (16, 5),
        }
    }

    /// Published parameter count, where one is known.
    pub const fn reference_param_count(self) -> Option<u64> {
        match self {
            Self::XS => Some(3_700_000),
            _ => None,
        }
    }

    /// Test-time input side of the published instance, used by stub backends.
    pub const fn reference_resolution(self) -> u32 {
        match self {
            Self::XS | Self::S => 182,
            Self::M => 256,
            Self::L => 356,
        }
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            Self::XS => "XS",
            Self::S => "S",
            Self::M => "M",
            Self::L => "L",
        }
    }
}

impl fmt::Display for InstanceName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InstanceName {
    type Err = InferenceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        let bare = trimmed
            .strip_prefix("X3D-")
            .or_else(|| trimmed.strip_prefix("x3d-"))
            .or_else(|| trimmed.strip_prefix("x3d_"))
            .unwrap_or(trimmed);
        match bare.to_ascii_uppercase().as_str() {
            "XS" => Ok(Self::XS),
            "S" => Ok(Self::S),
            "M" => Ok(Self::M),
            "L" => Ok(Self::L),
            _ => Err(InferenceError::UnknownInstance(s.to_owned())),
        }
    }
}

/// Clip geometry of one instance.
///
/// The input resolution is not a property of the instance name; it comes from
/// the model manifest (or the stub backend's configuration).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub name: InstanceName,
    pub frames_per_clip: usize,
    pub sampling_rate: usize,
    pub input_resolution: u32,
    pub embedding_dim: usize,
}

impl InstanceSpec {
    pub fn new(name: InstanceName, input_resolution: u32) -> Self {
        let (frames_per_clip, sampling_rate) = name.clip_geometry();
        Self {
            name,
            frames_per_clip,
            sampling_rate,
            input_resolution,
            embedding_dim: EMBEDDING_DIM,
        }
    }

    pub fn validate(&self) -> Result<(), InferenceError> {
        let (q, sr) = self.name.clip_geometry();
        if (self.frames_per_clip, self.sampling_rate) != (q, sr) {
            return Err(InferenceError::InvalidSpec(format!(
                "X3D-{} uses {q} frames at stride {sr}, got {} at stride {}",
                self.name, self.frames_per_clip, self.sampling_rate
            )));
        }
        if self.embedding_dim != EMBEDDING_DIM {
            return Err(InferenceError::InvalidSpec(format!(
                "embedding_dim must be {EMBEDDING_DIM}, got {}",
                self.embedding_dim
            )));
        }
        if self.input_resolution == 0 {
            return Err(InferenceError::InvalidSpec("input resolution must be > 0".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_table() {
        assert_eq!(InstanceName::XS.clip_geometry(), (4, 12));
        assert_eq!(InstanceName::S.clip_geometry(), (4, 12));
        assert_eq!(InstanceName::M.clip_geometry(), (13, 6));
        assert_eq!(InstanceName::L.clip_geometry(), (16, 5));
    }

    #[test]
    fn parse_names() {
        assert_eq!("xs".parse::<InstanceName>().unwrap(), InstanceName::XS);
        assert_eq!("X3D-L".parse::<InstanceName>().unwrap(), InstanceName::L);
        assert!("XL".parse::<InstanceName>().is_err());
    }

    #[test]
    fn canonical_order() {
        let mut names = vec![InstanceName::L, InstanceName::XS, InstanceName::M, InstanceName::S];
        names.sort();
        assert_eq!(names, InstanceName::ALL);
    }

    #[test]
    fn validate_rejects_wrong_geometry() {
        let mut spec = InstanceSpec::new(InstanceName::M, 224);
        spec.validate().unwrap();
        spec.sampling_rate = 5;
        assert!(spec.validate().is_err());
        let mut spec = InstanceSpec::new(InstanceName::XS, 160);
        spec.embedding_dim = 2048;
        assert!(spec.validate().is_err());
    }
}
