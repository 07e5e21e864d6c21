//! Numerical witnesses for nonintegrability near resonant tori.
//!
//! For a system `İ = ε h(I, θ; ε)`, `θ̇ = ω(I) + ε g(I, θ; ε)` with a resonant
//! torus `I = I*`, the crate evaluates the loop integrals
//! `𝓘ᵏ(θ) = Dω(I*) ∮ hᵏ(I*, ω(I*)τ + θ) dτ` along complex-time contours,
//! assembles monodromy matrices of the reduced variational equation and
//! turns them into a nonintegrability certificate. The restricted
//! three-body problem near the primary, in Delaunay variables, is provided
//! as a ready-made system.

pub mod contour;
pub mod delaunay;
pub mod kepler_core;
pub mod melnikov;
pub mod variational;
