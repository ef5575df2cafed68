//! Submajorization, Marcinkiewicz norms and orbit membership.
//!
//! `f ≺ g` means `∫₀ᵗ μ(f) ≤ ∫₀ᵗ μ(g)` for all `t > 0`. The orbit
//! `Ω(g) = {f : f ≺ g}` coincides with the unit ball of the Marcinkiewicz
//! space `M_G`, `G(t) = ∫₀ᵗ μ(g)`, whose norm is the supremum of the
//! head-integral ratio. `Ω′(g)` additionally pins nonnegativity and the
//! total integral.

use serde::{Deserialize, Serialize};

use crate::scalar::{ExtendedScalar, Scalar};
use crate::stepfn::{StepFnError, StepFunction};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MajorError {
    #[error("the reference function g must be nonzero")]
    ZeroDenominatorFunction,
    #[error("function and ball live on different domains")]
    DomainMismatch,
    #[error("invalid ball: {0}")]
    InvalidBall(String),
    #[error(transparent)]
    Step(#[from] StepFnError),
}

/// Which convex body a membership or extremality question refers to.
///
/// `Orbit` and `Marcinkiewicz` describe the same point set (the orbit is the
/// Marcinkiewicz unit ball); the distinct tags exist only for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallKind {
    Orbit,
    OrbitPrime,
    Marcinkiewicz,
}

/// A ball specification: the kind plus its generating function `g`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "WireBall", into = "WireBall")]
pub struct BallSpec {
    kind: BallKind,
    g: StepFunction,
}

#[derive(Serialize, Deserialize)]
struct WireBall {
    kind: BallKind,
    g: StepFunction,
}

impl TryFrom<WireBall> for BallSpec {
    type Error = MajorError;
    fn try_from(w: WireBall) -> Result<Self, Self::Error> {
        BallSpec::new(w.kind, w.g)
    }
}

impl From<BallSpec> for WireBall {
    fn from(b: BallSpec) -> Self {
        WireBall { kind: b.kind, g: b.g }
    }
}

impl BallSpec {
    pub fn new(kind: BallKind, g: StepFunction) -> Result<Self, MajorError> {
        if g.is_zero() {
            return Err(MajorError::InvalidBall("g must be nonzero".into()));
        }
        if kind == BallKind::OrbitPrime {
            if g.alpha().is_infinite() {
                return Err(MajorError::InvalidBall(
                    "orbit_prime requires a finite domain".into(),
                ));
            }
            if !g.is_nonnegative() {
                return Err(MajorError::InvalidBall(
                    "orbit_prime requires g >= 0 pointwise".into(),
                ));
            }
        }
        Ok(BallSpec { kind, g })
    }

    pub fn orbit(g: StepFunction) -> Result<Self, MajorError> {
        Self::new(BallKind::Orbit, g)
    }

    pub fn orbit_prime(g: StepFunction) -> Result<Self, MajorError> {
        Self::new(BallKind::OrbitPrime, g)
    }

    pub fn marcinkiewicz(g: StepFunction) -> Result<Self, MajorError> {
        Self::new(BallKind::Marcinkiewicz, g)
    }

    pub fn kind(&self) -> BallKind {
        self.kind
    }

    pub fn g(&self) -> &StepFunction {
        &self.g
    }
}

/// `f ≺ g`, decided exactly by comparing the two head-integral curves at
/// the union of their breakpoints and comparing terminal slopes (a negative
/// terminal slope gap eventually violates the inequality).
pub fn submajorizes(f: &StepFunction, g: &StepFunction) -> bool {
    f.head_integral().dominated_by(&g.head_integral())
}

/// `μ(f) = μ(g)` as functions on the common domain extension by zero:
/// finite breakpoint profiles and tail values must both agree.
pub fn equimeasurable(f: &StepFunction, g: &StepFunction) -> bool {
    if f.alpha() == g.alpha() {
        return f.rearrange() == g.rearrange();
    }
    // Different domains: compare the rearrangements as functions on [0, ∞),
    // each extended by zero beyond its own alpha.
    let (mf, mg) = (f.rearrange(), g.rearrange());
    if f.tail_value() != g.tail_value() {
        return false;
    }
    let profile = |h: &StepFunction| -> Vec<(Scalar, ExtendedScalar, Scalar)> {
        h.pieces()
            .iter()
            .filter(|p| !p.end.is_infinite() && !p.value.is_zero())
            .map(|p| (p.start.clone(), p.end.clone(), p.value.clone()))
            .collect()
    };
    profile(&mf) == profile(&mg)
}

/// Exact `‖f‖_{M_G} = sup_{t>0} ∫₀ᵗ μ(f) / ∫₀ᵗ μ(g)`; `Infinity` when
/// unbounded (positive tail of f against a vanishing tail of g).
pub fn marcinkiewicz_norm(
    f: &StepFunction,
    g: &StepFunction,
) -> Result<ExtendedScalar, MajorError> {
    if g.is_zero() {
        return Err(MajorError::ZeroDenominatorFunction);
    }
    Ok(f.head_integral().sup_ratio(&g.head_integral()))
}

/// Membership of `f` in the given ball; the function and the ball's `g`
/// must share the domain (callers extend explicitly if they mean to).
pub fn contains(ball: &BallSpec, f: &StepFunction) -> Result<bool, MajorError> {
    if f.alpha() != ball.g().alpha() {
        return Err(MajorError::DomainMismatch);
    }
    match ball.kind() {
        BallKind::Orbit | BallKind::Marcinkiewicz => Ok(submajorizes(f, ball.g())),
        BallKind::OrbitPrime => {
            if !f.is_nonnegative() {
                return Ok(false);
            }
            if !submajorizes(f, ball.g()) {
                return Ok(false);
            }
            Ok(f.total_integral() == ball.g().total_integral())
        }
    }
}
