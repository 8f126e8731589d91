//! Table-driven area and energy model.
//!
//! Numbers are unit-free. The default table carries fixture values for the
//! ALU, constant register and mux leg plus declared-synthetic multiplier and
//! LUT entries; energy per activation defaults to area / 100.

use crate::datapath::MergedDatapath;
use crate::mapper::Mapping;
use crate::op::{BlockClass, OpKind};
use crate::pe_spec::PeSpec;
use crate::sim::SimResult;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockCost {
    pub area: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuxCost {
    /// Area of one two-way selection stage; an n-input mux costs n - 1 of them.
    pub leg_area: f64,
    pub select_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    pub version: String,
    pub blocks: BTreeMap<BlockClass, BlockCost>,
    pub mux: MuxCost,
    #[serde(default)]
    pub config_bit_area: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CostError {
    #[error("cost table has no entry for block class `{0}`")]
    MissingCostEntry(BlockClass),
    #[error("cost table entry `{0}` is negative or not finite")]
    InvalidEntry(String),
    #[error("no simulation traces supplied")]
    EmptyTraces,
    #[error("traces contain no operations")]
    DivisionByZeroOps,
}

impl Default for CostTable {
    fn default() -> Self {
        let block = |area: f64| BlockCost {
            area,
            energy: area / 100.0,
        };
        CostTable {
            version: "fixture-defaults-v1".to_string(),
            blocks: BTreeMap::from([
                (BlockClass::Alu, block(80.0)),
                (BlockClass::Mul, block(500.0)),
                (BlockClass::Lut, block(40.0)),
                (BlockClass::Const, block(12.0)),
            ]),
            mux: MuxCost {
                leg_area: 30.0,
                select_energy: 0.3,
            },
            config_bit_area: 0.0,
        }
    }
}

impl CostTable {
    pub fn validate(&self) -> Result<(), CostError> {
        let check = |name: String, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(CostError::InvalidEntry(name))
            }
        };
        for (class, c) in &self.blocks {
            check(format!("{class}.area"), c.area)?;
            check(format!("{class}.energy"), c.energy)?;
        }
        check("mux.leg_area".into(), self.mux.leg_area)?;
        check("mux.select_energy".into(), self.mux.select_energy)?;
        check("config_bit_area".into(), self.config_bit_area)
    }

    pub fn block(&self, class: BlockClass) -> Result<&BlockCost, CostError> {
        self.blocks
            .get(&class)
            .ok_or(CostError::MissingCostEntry(class))
    }

    /// Area of the hardware needed to implement every op in `ops`: each
    /// distinct block class is paid once.
    pub fn ops_area(&self, ops: &BTreeSet<OpKind>) -> Result<f64, CostError> {
        classes(ops)
            .into_iter()
            .map(|c| self.block(c).map(|b| b.area))
            .sum()
    }

    pub fn ops_energy(&self, ops: &BTreeSet<OpKind>) -> Result<f64, CostError> {
        classes(ops)
            .into_iter()
            .map(|c| self.block(c).map(|b| b.energy))
            .sum()
    }

    pub fn mux_area(&self, legs: usize) -> f64 {
        legs.saturating_sub(1) as f64 * self.mux.leg_area
    }

    /// Every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> CostTable {
        CostTable {
            version: format!("{}*{}", self.version, factor),
            blocks: self
                .blocks
                .iter()
                .map(|(k, c)| {
                    (
                        *k,
                        BlockCost {
                            area: c.area * factor,
                            energy: c.energy * factor,
                        },
                    )
                })
                .collect(),
            mux: MuxCost {
                leg_area: self.mux.leg_area * factor,
                select_energy: self.mux.select_energy * factor,
            },
            config_bit_area: self.config_bit_area * factor,
        }
    }
}

pub fn classes(ops: &BTreeSet<OpKind>) -> BTreeSet<BlockClass> {
    ops.iter().filter_map(|op| op.block_class()).collect()
}

/// Area of the functional units only (no muxes, no configuration overhead).
pub fn block_area(dp: &MergedDatapath, costs: &CostTable) -> Result<f64, CostError> {
    dp.units().map(|(_, ops)| costs.ops_area(ops)).sum()
}

pub fn mux_area(dp: &MergedDatapath, costs: &CostTable) -> f64 {
    dp.muxes().map(|(_, legs)| costs.mux_area(legs)).sum()
}

/// Datapath muxes plus the output mux.
pub fn spec_mux_area(spec: &PeSpec, costs: &CostTable) -> f64 {
    mux_area(&spec.datapath, costs)
        + spec
            .output_mux
            .as_ref()
            .map_or(0.0, |m| costs.mux_area(m.legs.len()))
}

/// PE area: units, muxes (including the output mux), constant registers
/// (units of class const) and configuration-bit overhead.
pub fn pe_area(spec: &PeSpec, costs: &CostTable) -> Result<f64, CostError> {
    Ok(block_area(&spec.datapath, costs)?
        + spec_mux_area(spec, costs)
        + spec.config_bits as f64 * costs.config_bit_area)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub pe_area: f64,
    pub pe_count: usize,
    pub total_area: f64,
    pub energy_per_op: f64,
    pub mux_area: f64,
    pub total_ops: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_label: Option<String>,
    pub cost_table: CostTable,
}

/// Area and energy of an application mapped onto `spec`.
///
/// A unit activation costs the energy of every block class in the unit (a
/// shared ALU/multiplier unit toggles both); every active mux costs one select.
pub fn evaluate_mapping(
    m: &Mapping,
    spec: &PeSpec,
    traces: &[SimResult],
    costs: &CostTable,
    frequency_label: Option<String>,
) -> Result<CostReport, CostError> {
    costs.validate()?;
    if traces.is_empty() {
        return Err(CostError::EmptyTraces);
    }
    let area = pe_area(spec, costs)?;
    let unit_ops: BTreeMap<&str, &BTreeSet<OpKind>> = spec.datapath.units().collect();
    let mut energy = 0.0;
    let mut ops = 0u64;
    for t in traces {
        for (unit, n) in &t.unit_events {
            let e = match unit_ops.get(unit.as_str()) {
                Some(set) => costs.ops_energy(set)?,
                None => 0.0,
            };
            energy += *n as f64 * e;
        }
        energy += t.mux_events as f64 * costs.mux.select_energy;
        ops += t.total_ops();
    }
    if ops == 0 {
        return Err(CostError::DivisionByZeroOps);
    }
    let pe_count = m.instances.len();
    Ok(CostReport {
        pe_area: area,
        pe_count,
        total_area: area * pe_count as f64,
        energy_per_op: energy / ops as f64,
        mux_area: spec_mux_area(spec, costs),
        total_ops: ops / traces.len() as u64,
        frequency_label,
        cost_table: costs.clone(),
    })
}
