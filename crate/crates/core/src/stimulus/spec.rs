use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::StimulusError;

/// Version tag mixed into every canonical preimage. Bump when the meaning of
/// any parameter changes.
pub const SCHEMA_VERSION: u64 = 1;

pub const DEFAULT_CANVAS: u32 = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IllusionKind {
    MullerLyer,
    Ebbinghaus,
    CafeWall,
    ContrastStripe,
    ScintillatingGrid,
    Autostereogram,
}

impl IllusionKind {
    pub const ALL: [IllusionKind; 6] = [
        IllusionKind::MullerLyer,
        IllusionKind::Ebbinghaus,
        IllusionKind::CafeWall,
        IllusionKind::ContrastStripe,
        IllusionKind::ScintillatingGrid,
        IllusionKind::Autostereogram,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IllusionKind::MullerLyer => "muller_lyer",
            IllusionKind::Ebbinghaus => "ebbinghaus",
            IllusionKind::CafeWall => "cafe_wall",
            IllusionKind::ContrastStripe => "contrast_stripe",
            IllusionKind::ScintillatingGrid => "scintillating_grid",
            IllusionKind::Autostereogram => "autostereogram",
        }
    }

    fn index(self) -> u64 {
        IllusionKind::ALL.iter().position(|k| *k == self).unwrap() as u64
    }

    pub(crate) fn seed_part(self) -> u64 {
        self.index()
    }
}

impl fmt::Display for IllusionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IllusionKind {
    type Err = StimulusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        IllusionKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| StimulusError::UnknownKind(s.to_string()))
    }
}

/// Direction of the Müller-Lyer fins relative to the shaft.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum FinDirection {
    /// Arrowheads folding back over the shaft.
    Inward,
    /// Tails flaring away past the shaft ends.
    Outward,
}

impl From<FinDirection> for u8 {
    fn from(d: FinDirection) -> u8 {
        match d {
            FinDirection::Inward => 0,
            FinDirection::Outward => 1,
        }
    }
}

impl TryFrom<u8> for FinDirection {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            0 => Ok(FinDirection::Inward),
            1 => Ok(FinDirection::Outward),
            _ => Err(format!("fin direction code {v} out of range")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum HiddenShape {
    None,
    Circle,
    Square,
    Triangle,
    Cross,
    Star,
}

impl HiddenShape {
    pub const ALL: [HiddenShape; 6] = [
        HiddenShape::None,
        HiddenShape::Circle,
        HiddenShape::Square,
        HiddenShape::Triangle,
        HiddenShape::Cross,
        HiddenShape::Star,
    ];

    pub const VISIBLE: [HiddenShape; 5] = [
        HiddenShape::Circle,
        HiddenShape::Square,
        HiddenShape::Triangle,
        HiddenShape::Cross,
        HiddenShape::Star,
    ];
}

impl From<HiddenShape> for u8 {
    fn from(s: HiddenShape) -> u8 {
        HiddenShape::ALL.iter().position(|x| *x == s).unwrap() as u8
    }
}

impl TryFrom<u8> for HiddenShape {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        HiddenShape::ALL
            .get(usize::from(v))
            .copied()
            .ok_or_else(|| format!("hidden shape code {v} out of range"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MullerLyerParams {
    pub shaft_len_left: u32,
    pub shaft_len_right: u32,
    pub fin_len: u32,
    pub fin_angle_decideg: u32,
    pub fin_dir_left: FinDirection,
    pub fin_dir_right: FinDirection,
    pub vertical_sep: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EbbinghausParams {
    pub center_r_left: u32,
    pub center_r_right: u32,
    pub inducer_r_left: u32,
    pub inducer_r_right: u32,
    pub inducer_count: u32,
    pub ring_gap: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CafeWallParams {
    pub tile_w: u32,
    pub tile_h: u32,
    pub row_offset_milli: u32,
    pub mortar_px: u32,
    pub mortar_gray: u32,
    pub rows: u32,
    pub cols: u32,
    pub true_tilt_decideg: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContrastStripeParams {
    pub bg_gray_left: u32,
    pub bg_gray_right: u32,
    pub stripe_gray_left: u32,
    pub stripe_gray_right: u32,
    pub stripe_height_milli: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScintillatingGridParams {
    pub bg_gray: u32,
    pub line_gray: u32,
    pub disk_gray: u32,
    pub grid_n: u32,
    pub line_px: u32,
    pub disk_r: u32,
    pub true_black_disks: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AutostereogramParams {
    pub pattern_period: u32,
    pub depth_amplitude: u32,
    pub hidden_shape: HiddenShape,
}

/// Kind-specific parameter record. The variant is the illusion kind.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum IllusionParams {
    MullerLyer(MullerLyerParams),
    Ebbinghaus(EbbinghausParams),
    CafeWall(CafeWallParams),
    ContrastStripe(ContrastStripeParams),
    ScintillatingGrid(ScintillatingGridParams),
    Autostereogram(AutostereogramParams),
}

/// Exact, integer-only description of one stimulus instance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IllusionSpec {
    pub canvas_w: u32,
    pub canvas_h: u32,
    pub seed: u64,
    #[serde(flatten)]
    pub params: IllusionParams,
}

/// Canonical digest of a spec; the identity used for novelty checks.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpecHash(pub [u8; 32]);

impl SpecHash {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, StimulusError> {
        let bytes = hex::decode(s).map_err(|_| StimulusError::BadDigest(s.to_string()))?;
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| StimulusError::BadDigest(s.to_string()))?;
        Ok(SpecHash(arr))
    }
}

impl fmt::Debug for SpecHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpecHash({})", self.to_hex())
    }
}

impl fmt::Display for SpecHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for SpecHash {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for SpecHash {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        SpecHash::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

impl IllusionSpec {
    pub fn new(seed: u64, params: IllusionParams) -> Self {
        IllusionSpec {
            canvas_w: DEFAULT_CANVAS,
            canvas_h: DEFAULT_CANVAS,
            seed,
            params,
        }
    }

    pub fn kind(&self) -> IllusionKind {
        match &self.params {
            IllusionParams::MullerLyer(_) => IllusionKind::MullerLyer,
            IllusionParams::Ebbinghaus(_) => IllusionKind::Ebbinghaus,
            IllusionParams::CafeWall(_) => IllusionKind::CafeWall,
            IllusionParams::ContrastStripe(_) => IllusionKind::ContrastStripe,
            IllusionParams::ScintillatingGrid(_) => IllusionKind::ScintillatingGrid,
            IllusionParams::Autostereogram(_) => IllusionKind::Autostereogram,
        }
    }

    /// Canonical serialization: compact JSON, keys sorted lexicographically at
    /// every level, integer leaves only, schema tag included.
    pub fn canonical_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("spec serializes");
        if let Value::Object(map) = &mut value {
            map.insert("schema".into(), Value::from(SCHEMA_VERSION));
        }
        let mut out = String::new();
        write_canonical(&value, &mut out);
        out
    }

    pub fn from_json(text: &str) -> Result<Self, StimulusError> {
        let mut value: Value =
            serde_json::from_str(text).map_err(|e| StimulusError::Parse(e.to_string()))?;
        Self::from_value(&mut value)
    }

    pub(crate) fn from_value(value: &mut Value) -> Result<Self, StimulusError> {
        if let Value::Object(map) = value {
            if let Some(schema) = map.remove("schema") {
                if schema.as_u64() != Some(SCHEMA_VERSION) {
                    return Err(StimulusError::Parse(format!("unsupported schema {schema}")));
                }
            }
        }
        serde_json::from_value(value.clone()).map_err(|e| StimulusError::Parse(e.to_string()))
    }

    pub fn canonical_hash(&self) -> SpecHash {
        SpecHash(Sha256::digest(self.canonical_json().as_bytes()).into())
    }
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_canonical(&map[k], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(v, out);
            }
            out.push(']');
        }
        other => {
            debug_assert!(!other.is_f64(), "floats are not allowed in a spec");
            out.push_str(&other.to_string());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stripe() -> IllusionSpec {
        IllusionSpec::new(
            11,
            IllusionParams::ContrastStripe(ContrastStripeParams {
                bg_gray_left: 20,
                bg_gray_right: 230,
                stripe_gray_left: 128,
                stripe_gray_right: 128,
                stripe_height_milli: 120,
            }),
        )
    }

    #[test]
    fn canonical_json_sorts_keys_and_tags_schema() {
        assert_eq!(
            stripe().canonical_json(),
            r#"{"canvas_h":512,"canvas_w":512,"kind":"contrast_stripe","params":{"bg_gray_left":20,"bg_gray_right":230,"stripe_gray_left":128,"stripe_gray_right":128,"stripe_height_milli":120},"schema":1,"seed":11}"#
        );
    }

    #[test]
    fn json_round_trip() {
        let s = stripe();
        assert_eq!(IllusionSpec::from_json(&s.canonical_json()).unwrap(), s);
    }

    #[test]
    fn enums_serialize_as_integers() {
        let spec = IllusionSpec::new(
            1,
            IllusionParams::Autostereogram(AutostereogramParams {
                pattern_period: 80,
                depth_amplitude: 10,
                hidden_shape: HiddenShape::Cross,
            }),
        );
        assert!(spec.canonical_json().contains(r#""hidden_shape":4"#));
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let text = stripe().canonical_json().replace(r#""schema":1"#, r#""schema":2"#);
        assert!(IllusionSpec::from_json(&text).is_err());
    }

    #[test]
    fn hash_hex_round_trip() {
        let h = stripe().canonical_hash();
        assert_eq!(SpecHash::from_hex(&h.to_hex()).unwrap(), h);
        assert!(SpecHash::from_hex("abc").is_err());
    }

    #[test]
    fn kind_parses_from_snake_case() {
        for k in IllusionKind::ALL {
            assert_eq!(k.as_str().parse::<IllusionKind>().unwrap(), k);
        }
        assert!("face_vase".parse::<IllusionKind>().is_err());
    }
}
