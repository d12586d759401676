//! Ordered, named coordinates of the (lifted) parameter space.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Time,
    TimeSurrogate,
    Parameter,
    Velocity,
}

/// Shape of one weight matrix.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerShape {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

impl LayerShape {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Self {
            name: name.into(),
            rows,
            cols,
        }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Position of a parameter or velocity coordinate inside its weight matrix.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockEntry {
    pub layer: usize,
    pub row: usize,
    pub col: usize,
}

/// Coordinates are laid out as `(time-like?, vec(U_1)..vec(U_q), vec(dU_1)..vec(dU_q))`,
/// column-major within each matrix.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VariableSpace {
    names: Vec<String>,
    kinds: Vec<VarKind>,
    blocks: Vec<Option<BlockEntry>>,
    layers: Vec<LayerShape>,
    param_offset: usize,
    velocity_offset: Option<usize>,
    dim: usize,
}

/// Which time-like coordinate (if any) leads a lifted space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeCoordinate {
    None,
    Time,
    Surrogate,
}

impl VariableSpace {
    /// Parameter-only space `θ ∈ ℝ^D`.
    pub fn parameters(layers: Vec<LayerShape>) -> Result<Arc<Self>> {
        Self::build(layers, TimeCoordinate::None, false)
    }

    /// Phase space `(t or s, θ, θ̇)` of dimension `2D + 1`.
    pub fn lifted(layers: Vec<LayerShape>, time: TimeCoordinate) -> Result<Arc<Self>> {
        Self::build(layers, time, true)
    }

    /// Plain space with anonymous parameter coordinates; handy for small algebra.
    pub fn plain(names: &[&str]) -> Arc<Self> {
        let n = names.len();
        let mut space =
            Self::build(vec![LayerShape::new("x", 1, n)], TimeCoordinate::None, false).expect("plain space");
        let s = Arc::make_mut(&mut space);
        s.names = names.iter().map(|n| n.to_string()).collect();
        let mut seen = std::collections::HashSet::new();
        assert!(s.names.iter().all(|n| seen.insert(n.clone())), "duplicate names");
        space
    }

    fn build(layers: Vec<LayerShape>, time: TimeCoordinate, velocity: bool) -> Result<Arc<Self>> {
        if layers.is_empty() || layers.iter().any(|l| l.is_empty()) {
            return Err(Error::InvalidSpace("empty layer".into()));
        }
        let mut names = Vec::new();
        let mut kinds = Vec::new();
        let mut blocks = Vec::new();
        match time {
            TimeCoordinate::None => {}
            TimeCoordinate::Time => {
                names.push("t".to_string());
                kinds.push(VarKind::Time);
                blocks.push(None);
            }
            TimeCoordinate::Surrogate => {
                names.push("s".to_string());
                kinds.push(VarKind::TimeSurrogate);
                blocks.push(None);
            }
        }
        let param_offset = names.len();
        let passes: &[(VarKind, &str)] = if velocity {
            &[(VarKind::Parameter, ""), (VarKind::Velocity, "d")]
        } else {
            &[(VarKind::Parameter, "")]
        };
        let mut velocity_offset = None;
        for &(kind, prefix) in passes {
            if kind == VarKind::Velocity {
                velocity_offset = Some(names.len());
            }
            for (li, layer) in layers.iter().enumerate() {
                for col in 0..layer.cols {
                    for row in 0..layer.rows {
                        names.push(format!("{prefix}{}[{},{}]", layer.name, row + 1, col + 1));
                        kinds.push(kind);
                        blocks.push(Some(BlockEntry { layer: li, row, col }));
                    }
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        if !names.iter().all(|n| seen.insert(n.as_str())) {
            return Err(Error::InvalidSpace("duplicate variable names".into()));
        }
        let dim = layers.iter().map(LayerShape::len).sum();
        Ok(Arc::new(Self {
            names,
            kinds,
            blocks,
            layers,
            param_offset,
            velocity_offset,
            dim,
        }))
    }

    /// Same layout with the leading time variable replaced.
    pub fn with_time(&self, time: TimeCoordinate) -> Result<Arc<Self>> {
        Self::build(self.layers.clone(), time, self.velocity_offset.is_some())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn kind(&self, i: usize) -> VarKind {
        self.kinds[i]
    }

    pub fn kinds(&self) -> &[VarKind] {
        &self.kinds
    }

    pub fn block(&self, i: usize) -> Option<&BlockEntry> {
        self.blocks[i].as_ref()
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    /// Number of parameters `D`.
    pub fn param_dim(&self) -> usize {
        self.dim
    }

    pub fn time_index(&self) -> Option<usize> {
        match self.kinds.first() {
            Some(VarKind::Time | VarKind::TimeSurrogate) => Some(0),
            _ => None,
        }
    }

    pub fn time_kind(&self) -> TimeCoordinate {
        match self.kinds.first() {
            Some(VarKind::Time) => TimeCoordinate::Time,
            Some(VarKind::TimeSurrogate) => TimeCoordinate::Surrogate,
            _ => TimeCoordinate::None,
        }
    }

    pub fn has_velocity(&self) -> bool {
        self.velocity_offset.is_some()
    }

    /// Index of the `k`-th parameter coordinate.
    pub fn param(&self, k: usize) -> usize {
        debug_assert!(k < self.dim);
        self.param_offset + k
    }

    /// Index of the `k`-th velocity coordinate.
    pub fn velocity(&self, k: usize) -> Option<usize> {
        self.velocity_offset.map(|o| o + k)
    }

    pub fn param_range(&self) -> std::ops::Range<usize> {
        self.param_offset..self.param_offset + self.dim
    }

    pub fn velocity_range(&self) -> Option<std::ops::Range<usize>> {
        self.velocity_offset.map(|o| o..o + self.dim)
    }

    /// Offset of `layer` inside the parameter block.
    pub fn layer_offset(&self, layer: usize) -> usize {
        self.layers[..layer].iter().map(LayerShape::len).sum()
    }

    /// Parameter-block position of entry `(row, col)` of `layer` (column-major).
    pub fn entry(&self, layer: usize, row: usize, col: usize) -> usize {
        let l = &self.layers[layer];
        debug_assert!(row < l.rows && col < l.cols);
        self.layer_offset(layer) + col * l.rows + row
    }

    pub fn layer_by_name(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lifted_layout_is_column_major() {
        let layers = vec![LayerShape::new("U", 2, 2), LayerShape::new("V", 2, 1)];
        let s = VariableSpace::lifted(layers, TimeCoordinate::Time).unwrap();
        assert_eq!(s.len(), 2 * 6 + 1);
        assert_eq!(s.name(0), "t");
        assert_eq!(s.name(1), "U[1,1]");
        assert_eq!(s.name(2), "U[2,1]");
        assert_eq!(s.name(3), "U[1,2]");
        assert_eq!(s.name(5), "V[1,1]");
        assert_eq!(s.name(7), "dU[1,1]");
        assert_eq!(s.param(s.entry(0, 0, 1)), 3);
        assert_eq!(s.velocity(s.entry(1, 1, 0)), Some(12));
        assert_eq!(s.time_index(), Some(0));
    }

    #[test]
    fn surrogate_relabels_time() {
        let p = VariableSpace::lifted(vec![LayerShape::new("U", 1, 1)], TimeCoordinate::Time).unwrap();
        let s = p.with_time(TimeCoordinate::Surrogate).unwrap();
        assert_eq!(s.name(0), "s");
        assert_eq!(s.kind(0), VarKind::TimeSurrogate);
        assert_eq!(s.len(), p.len());
    }
}
