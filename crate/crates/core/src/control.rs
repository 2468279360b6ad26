//! Piecewise-constant controls and the two time frames they live in.
//!
//! In the original frame a piece `(t, u)` acts as `e^{t(A + uB)}` with
//! `0 < u < delta`; in the reparametrized frame it acts as `e^{t(uA + B)}`
//! with `u > delta`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Original,
    Reparametrized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Piece {
    pub duration: f64,
    pub value: f64,
}

impl Piece {
    pub fn new(duration: f64, value: f64) -> Self {
        Self { duration, value }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseConstantControl {
    frame: Frame,
    delta: f64,
    pieces: Vec<Piece>,
    #[serde(skip_serializing_if = "serde_json::Map::is_empty")]
    meta: serde_json::Map<String, serde_json::Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawControl {
    frame: Frame,
    delta: f64,
    pieces: Vec<Piece>,
    #[serde(default)]
    meta: serde_json::Map<String, serde_json::Value>,
}

impl<'de> Deserialize<'de> for PiecewiseConstantControl {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawControl::deserialize(d)?;
        let mut c = PiecewiseConstantControl::new(raw.frame, raw.delta, raw.pieces)
            .map_err(serde::de::Error::custom)?;
        c.meta = raw.meta;
        Ok(c)
    }
}

impl PiecewiseConstantControl {
    /// Validates durations (positive, finite) and values against the frame's
    /// admissible set.
    pub fn new(frame: Frame, delta: f64, pieces: Vec<Piece>) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidControl(format!(
                "delta must be positive and finite, got {delta}"
            )));
        }
        for (i, p) in pieces.iter().enumerate() {
            if !(p.duration > 0.0) || !p.duration.is_finite() {
                return Err(Error::InvalidControl(format!(
                    "piece {i}: duration must be positive and finite, got {}",
                    p.duration
                )));
            }
            let ok = match frame {
                Frame::Original => p.value > 0.0 && p.value < delta,
                Frame::Reparametrized => p.value > delta && p.value.is_finite(),
            };
            if !ok {
                let range = match frame {
                    Frame::Original => format!("(0, {delta})"),
                    Frame::Reparametrized => format!("({delta}, inf)"),
                };
                return Err(Error::InvalidControl(format!(
                    "piece {i}: value {} outside {range}",
                    p.value
                )));
            }
        }
        Ok(Self {
            frame,
            delta,
            pieces,
            meta: serde_json::Map::new(),
        })
    }

    pub fn empty(frame: Frame, delta: f64) -> Result<Self> {
        Self::new(frame, delta, Vec::new())
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn meta(&self) -> &serde_json::Map<String, serde_json::Value> {
        &self.meta
    }

    pub fn with_meta(mut self, key: &str, value: serde_json::Value) -> Self {
        self.meta.insert(key.to_string(), value);
        self
    }

    pub fn total_duration(&self) -> f64 {
        self.pieces.iter().map(|p| p.duration).sum()
    }

    /// `sum duration * value`.
    pub fn integrated_value(&self) -> f64 {
        self.pieces.iter().map(|p| p.duration * p.value).sum()
    }

    /// Duration in the reparametrized frame. For an original-frame control
    /// this is its integrated value.
    pub fn reparametrized_duration(&self) -> f64 {
        match self.frame {
            Frame::Original => self.integrated_value(),
            Frame::Reparametrized => self.total_duration(),
        }
    }

    /// Appends the pieces of `other`, which must share frame and bound.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.frame != other.frame || self.delta != other.delta {
            return Err(Error::InvalidControl(
                "concatenated controls must share frame and delta".into(),
            ));
        }
        let mut out = self.clone();
        out.pieces.extend_from_slice(&other.pieces);
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// `(t, u) -> (t u, 1/u)` piecewise, flipping the frame; the bound maps to
/// `1/delta`. Exactly an involution up to rounding of `1/(1/u)`.
pub fn reparametrize(c: &PiecewiseConstantControl) -> Result<PiecewiseConstantControl> {
    let pieces = c
        .pieces
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if p.value == 0.0 {
                Err(Error::InvalidControl(format!(
                    "piece {i} has value 0 and cannot be reparametrized"
                )))
            } else {
                Ok(Piece::new(p.duration * p.value, 1.0 / p.value))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let frame = match c.frame {
        Frame::Original => Frame::Reparametrized,
        Frame::Reparametrized => Frame::Original,
    };
    let mut out = PiecewiseConstantControl::new(frame, 1.0 / c.delta, pieces)?;
    out.meta = c.meta.clone();
    Ok(out)
}
