//! Primitive operation alphabet and its hardware block classes.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Number of data ports exposed by an opaque memory node.
pub const MEM_PORTS: usize = 4;

/// A primitive dataflow operation on 16-bit unsigned words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Const,
    Input,
    Output,
    Add,
    Sub,
    Mul,
    Shl,
    Shr,
    And,
    Or,
    Xor,
    Not,
    Lut,
    Eq,
    Neq,
    Lt,
    Lte,
    Gt,
    Gte,
    Min,
    Max,
    Abs,
    Absd,
    Sel,
    Mem,
}

/// The hardware block an operation is implemented on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockClass {
    Alu,
    Mul,
    Lut,
    Const,
}

impl OpKind {
    pub const ALL: [OpKind; 25] = [
        OpKind::Const,
        OpKind::Input,
        OpKind::Output,
        OpKind::Add,
        OpKind::Sub,
        OpKind::Mul,
        OpKind::Shl,
        OpKind::Shr,
        OpKind::And,
        OpKind::Or,
        OpKind::Xor,
        OpKind::Not,
        OpKind::Lut,
        OpKind::Eq,
        OpKind::Neq,
        OpKind::Lt,
        OpKind::Lte,
        OpKind::Gt,
        OpKind::Gte,
        OpKind::Min,
        OpKind::Max,
        OpKind::Abs,
        OpKind::Absd,
        OpKind::Sel,
        OpKind::Mem,
    ];

    /// Number of data input ports. `mem` is opaque and accepts up to [`MEM_PORTS`].
    pub fn arity(self) -> usize {
        use OpKind::*;
        match self {
            Const | Input => 0,
            Not | Abs | Output => 1,
            Sel | Lut => 3,
            Mem => MEM_PORTS,
            _ => 2,
        }
    }

    pub fn is_commutative(self) -> bool {
        use OpKind::*;
        matches!(self, Add | Mul | And | Or | Xor | Eq | Neq | Min | Max | Absd)
    }

    /// Operations that occupy a processing element (everything except I/O and memory).
    pub fn is_datapath(self) -> bool {
        self.block_class().is_some()
    }

    /// Datapath operations other than `const`.
    pub fn is_compute(self) -> bool {
        self.is_datapath() && self != OpKind::Const
    }

    pub fn block_class(self) -> Option<BlockClass> {
        use OpKind::*;
        match self {
            Add | Sub | Shl | Shr | Eq | Neq | Lt | Lte | Gt | Gte | Min | Max | Abs | Absd
            | Sel => Some(BlockClass::Alu),
            Mul => Some(BlockClass::Mul),
            And | Or | Xor | Not | Lut => Some(BlockClass::Lut),
            Const => Some(BlockClass::Const),
            Input | Output | Mem => None,
        }
    }

    /// Whether the node carries a configuration-time value (constant or LUT table).
    pub fn has_value(self) -> bool {
        matches!(self, OpKind::Const | OpKind::Lut)
    }

    pub fn name(self) -> &'static str {
        use OpKind::*;
        match self {
            Const => "const",
            Input => "input",
            Output => "output",
            Add => "add",
            Sub => "sub",
            Mul => "mul",
            Shl => "shl",
            Shr => "shr",
            And => "and",
            Or => "or",
            Xor => "xor",
            Not => "not",
            Lut => "lut",
            Eq => "eq",
            Neq => "neq",
            Lt => "lt",
            Lte => "lte",
            Gt => "gt",
            Gte => "gte",
            Min => "min",
            Max => "max",
            Abs => "abs",
            Absd => "absd",
            Sel => "sel",
            Mem => "mem",
        }
    }

    /// Evaluate the operation with 16-bit wraparound semantics.
    ///
    /// `value` is the configuration field for `const` and `lut`. Missing inputs read as 0.
    pub fn eval(self, inputs: &[u16], value: u16) -> u16 {
        use OpKind::*;
        let at = |i: usize| inputs.get(i).copied().unwrap_or(0);
        let (a, b) = (at(0), at(1));
        let flag = |c: bool| c as u16;
        match self {
            Const => value,
            Input | Output | Mem => a,
            Add => a.wrapping_add(b),
            Sub => a.wrapping_sub(b),
            Mul => a.wrapping_mul(b),
            Shl => a.checked_shl(b as u32).unwrap_or(0),
            Shr => a.checked_shr(b as u32).unwrap_or(0),
            And => a & b,
            Or => a | b,
            Xor => a ^ b,
            Not => !a,
            Lut => {
                let c = at(2);
                let mut out = 0u16;
                for bit in 0..16 {
                    let idx = ((a >> bit) & 1) | (((b >> bit) & 1) << 1) | (((c >> bit) & 1) << 2);
                    out |= ((value >> idx) & 1) << bit;
                }
                out
            }
            Eq => flag(a == b),
            Neq => flag(a != b),
            Lt => flag(a < b),
            Lte => flag(a <= b),
            Gt => flag(a > b),
            Gte => flag(a >= b),
            Min => a.min(b),
            Max => a.max(b),
            Abs => (a as i16).unsigned_abs(),
            Absd => a.abs_diff(b),
            Sel => {
                if a != 0 {
                    b
                } else {
                    at(2)
                }
            }
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown operation `{0}`")]
pub struct UnknownOp(pub String);

impl FromStr for OpKind {
    type Err = UnknownOp;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OpKind::ALL
            .iter()
            .copied()
            .find(|op| op.name() == s)
            .ok_or_else(|| UnknownOp(s.to_string()))
    }
}

impl fmt::Display for BlockClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockClass::Alu => "alu",
            BlockClass::Mul => "mul",
            BlockClass::Lut => "lut",
            BlockClass::Const => "const",
        })
    }
}
