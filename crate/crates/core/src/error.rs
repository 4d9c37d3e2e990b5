use num_complex::Complex64;

/// Errors shared across the toolkit.
///
/// Every verdict-producing routine distinguishes "the property fails" (a
/// normal return value carrying a witness) from "the computation cannot be
/// trusted at this window and resolution" (one of the variants below).
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("region has no shapes or an empty raster")]
    EmptyRegion,
    #[error("window is degenerate or too small for spacing {0}")]
    DegenerateWindow(f64),
    #[error("regions live on different windows or spacings")]
    WindowMismatch,
    #[error("{0} must be positive, got {1}")]
    NonPositive(&'static str, f64),
    #[error("set is not compact in the window: raster touches the boundary")]
    NotCompactInWindow,
    #[error("separation {0} collapsed below the grid spacing; refine the resolution")]
    ResolutionTooCoarse(f64),
    #[error("sample set is rank deficient at degree {0} (duplicate or collinear points)")]
    RankDeficient(usize),
    #[error("sample arrays are empty or have mismatched lengths")]
    BadSamples,
    #[error("derivative magnitude {mag:.3e} at {at} is below the critical-point threshold")]
    CriticalPointSuspected { at: Complex64, mag: f64 },
    #[error("log branch continuation is inconsistent near {at}; the sampled set winds around a zero")]
    SheetInconsistency { at: Complex64 },
    #[error("quadrature failed to reach tolerance {wanted:.3e}; error estimate {got:.3e}")]
    QuadratureTolerance { wanted: f64, got: f64 },
    #[error("contour sampling too coarse for a reliable winding number")]
    ContourTooCoarse,
    #[error("epsilon sequence must be nonincreasing (index {0})")]
    NonMonotoneEpsilon(usize),
    #[error("relocation failed: target set too thick near a critical point at {at}")]
    RelocationFailed { at: Complex64 },
    #[error("path bound violated: length-scale floor {r:.3e} does not exceed measured path bound {c:.3e}")]
    PathBoundViolated { r: f64, c: f64 },
    #[error("target set is disconnected at sampling scale ({0} raster components unreachable)")]
    DisconnectedTarget(usize),
    #[error("exhaustion stage {stage}: {reason}")]
    ExhaustionFailed { stage: usize, reason: String },
    #[error("pipeline stage {stage} aborted in step {substep}: {detail}")]
    StageAbort {
        stage: usize,
        substep: &'static str,
        detail: String,
    },
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
