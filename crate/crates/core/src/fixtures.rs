//! Small reference graphs used by the examples, tests and bundled data files.

use crate::graph::{DataflowGraph, GraphBuilder};
use crate::op::OpKind;

/// Four-tap convolution `((((i0*w0 + i1*w1) + i2*w2) + i3*w3) + c)` with
/// constant weights, input nodes `i0..i3`, `c` and a single `out` node.
pub fn convolution_with_weights(weights: [u16; 4]) -> DataflowGraph {
    let mut b = GraphBuilder::new();
    for k in 0..4 {
        b.node(format!("i{k}"), OpKind::Input);
        b.constant(format!("w{k}"), weights[k]);
        b.node(format!("mul{k}"), OpKind::Mul);
        b.edge(format!("i{k}"), format!("mul{k}"), 0);
        b.edge(format!("w{k}"), format!("mul{k}"), 1);
    }
    b.node("c", OpKind::Input);
    for k in 0..4 {
        b.node(format!("add{k}"), OpKind::Add);
    }
    b.node("out", OpKind::Output);
    b.edge("mul0", "add0", 0)
        .edge("mul1", "add0", 1)
        .edge("add0", "add1", 0)
        .edge("mul2", "add1", 1)
        .edge("add1", "add2", 0)
        .edge("mul3", "add2", 1)
        .edge("add2", "add3", 0)
        .edge("c", "add3", 1)
        .edge("add3", "out", 0);
    b.build().expect("fixture is valid")
}

pub fn convolution() -> DataflowGraph {
    convolution_with_weights([1, 1, 1, 1])
}

/// The multiply/add tree of the convolution without constants or I/O nodes;
/// operands are left as undriven ports.
pub fn convolution_core() -> DataflowGraph {
    let mut b = GraphBuilder::new();
    for k in 0..4 {
        b.node(format!("mul{k}"), OpKind::Mul);
    }
    for k in 0..4 {
        b.node(format!("add{k}"), OpKind::Add);
    }
    b.edge("mul0", "add0", 0)
        .edge("mul1", "add0", 1)
        .edge("add0", "add1", 0)
        .edge("mul2", "add1", 1)
        .edge("add1", "add2", 0)
        .edge("mul3", "add2", 1)
        .edge("add2", "add3", 0);
    b.build().expect("fixture is valid")
}

/// `mul -> add -> add` chain, the multiply followed by two accumulations.
pub fn mul_add_add() -> DataflowGraph {
    GraphBuilder::new()
        .node("m", OpKind::Mul)
        .node("a0", OpKind::Add)
        .node("a1", OpKind::Add)
        .edge("m", "a0", 0)
        .edge("a0", "a1", 0)
        .build()
        .expect("fixture is valid")
}

/// `a1 = a0 + a2` where `a0` is a constant and `a2` adds two operands.
pub fn merge_left() -> DataflowGraph {
    GraphBuilder::new()
        .constant("a0", 0)
        .node("a2", OpKind::Add)
        .node("a1", OpKind::Add)
        .edge("a0", "a1", 0)
        .edge("a2", "a1", 1)
        .build()
        .expect("fixture is valid")
}

/// `b2 = (b0 * x) + b3` where `b0` is a constant and `b3` adds two operands.
pub fn merge_right() -> DataflowGraph {
    GraphBuilder::new()
        .constant("b0", 0)
        .node("b1", OpKind::Mul)
        .node("b3", OpKind::Add)
        .node("b2", OpKind::Add)
        .edge("b0", "b1", 0)
        .edge("b1", "b2", 0)
        .edge("b3", "b2", 1)
        .build()
        .expect("fixture is valid")
}

/// Fused multiply-add whose coefficient comes from a constant register.
pub fn const_fma() -> DataflowGraph {
    GraphBuilder::new()
        .constant("k", 0)
        .node("m", OpKind::Mul)
        .node("a", OpKind::Add)
        .edge("k", "m", 1)
        .edge("m", "a", 0)
        .build()
        .expect("fixture is valid")
}
