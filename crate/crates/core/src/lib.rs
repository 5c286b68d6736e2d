//! Graph-directed IFS construction for self-similar sets of finite overlap type.
//!
//! The pipeline runs from an IFS of planar similitudes with exact algebraic data to a
//! non-overlapping system of set equations:
//!
//! 1. [`nbrgraph::build_neighbor_graph`] enumerates neighbor maps `f⁻¹g` symbolically;
//! 2. [`nbrgraph::extract_overlap_graph`] keeps the vertices that lead back to the identity;
//! 3. [`gifsbuild::build_gifs`] cuts overlaps away from lexicographically larger pieces;
//! 4. [`reduce`] merges equivalent attractors and drops redundant overlap vertices;
//! 5. [`dimension`] computes incidence matrices, characteristic polynomials and dimensions;
//! 6. [`render`] expands pieces into point clouds, SVG figures and DOT graphs.

pub mod algebra;
pub mod dimension;
pub mod gifsbuild;
pub mod nbrgraph;
pub mod reduce;
pub mod render;
pub mod similitude;
