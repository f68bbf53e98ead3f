//! Hybrid construction of piecewise-linear fuzzy numbers from data and
//! expert judgement.
//!
//! Data are clustered with convex fuzzy k-means ([`cfkm`]), every
//! intermediate result is shown to a decision-maker as a Deck-of-Cards chain
//! ([`cards`]), and the expert-edited chains drive the next step of the
//! elicitation session ([`pipeline`]).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::large_enum_variant)]

pub mod cards;
pub mod cfkm;
pub mod data;
pub mod fuzzy;
pub mod pipeline;
pub mod service;
pub mod study;
