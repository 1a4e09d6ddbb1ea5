use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lattice spacing must be positive, got {0}")]
    NonPositiveSpacing(f64),
    #[error("extent {extent} is not an integer multiple of the spacing {spacing}")]
    NonIntegerExtent { extent: f64, spacing: f64 },
    #[error("center set is not uniformly discrete: duplicate center at site {0}")]
    DuplicateCenter(usize),
    #[error("total flux {total} is not an integer under periodic boundary (nearest valid b = {suggested_b})")]
    FluxQuantization { total: f64, suggested_b: f64 },
    #[error("operator is not Hermitian (relative defect {0:e})")]
    NotHermitian(f64),
    #[error("eigendecomposition did not converge")]
    EigenFailure,
    #[error("band window [{lo}, {hi}] is not separated: eigenvalue {eigenvalue} within 1e-8 of its edge")]
    WindowNotSeparated { lo: f64, hi: f64, eigenvalue: f64 },
    #[error("function is not a projection on this spectrum: eigenvalues {0:?} lie in the bump transition region")]
    NotAProjection(Vec<f64>),
    #[error("spectral gap closed along the homotopy at t = {t} (tracked rank {rank_before} -> {rank_after})")]
    GapClosure {
        t: f64,
        rank_before: usize,
        rank_after: usize,
    },
    #[error("band crossing at k = ({kx:.6}, {ky:.6}): gap {gap:e}")]
    BandCrossing { kx: f64, ky: f64, gap: f64 },
    #[error("cone cutoff disk covers {fraction:.3} of the sample; no bulk left")]
    CutoffTooLarge { fraction: f64 },
    #[error("family is not orthonormal: Gram entry ({i}, {j}) = {re:+.3e}{im:+.3e}i")]
    NotOrthonormal {
        i: usize,
        j: usize,
        re: f64,
        im: f64,
    },
    #[error("function {index} has support at site {site}, outside the ball of radius {radius} around its center")]
    SupportViolation {
        index: usize,
        site: usize,
        radius: f64,
    },
    #[error("ball of radius {radius} around center site {center} contains no sites")]
    EmptyBall { center: usize, radius: f64 },
    #[error("multiplicity {multiplicity} at center site {center} exceeds the {available} sites available in its packing ball")]
    MultiplicityExceedsSites {
        center: usize,
        multiplicity: usize,
        available: usize,
    },
    #[error("rank mismatch: centers carry {centers} functions but the projection has rank {rank}")]
    RankMismatch { centers: usize, rank: usize },
    #[error("index sets differ: {0}")]
    IndexMismatch(String),
    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
