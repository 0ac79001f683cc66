//! Heat kernel, truncated kernel, mollifiers, the Q-convolved kernels and
//! the renormalisation constants.

pub mod bounds;
pub mod constants;
pub mod heat;
pub mod mollifier;
pub mod qfun;
pub mod quad;
pub mod spectral;

pub use bounds::{kq_kernel, mollified_kernel, q_function, verify_appendix_bounds, BoundsReport};
pub use constants::{assemble_c, c1_only, constants, log_fit, AssembledC, Basis, ConstantsRecord, LinearFit};
pub use heat::{build_truncated_kernel, heat_kernel, KernelKind, KernelSpec};
pub use mollifier::{MollifierSpec, Profile};
pub use qfun::{QSpec, QTable};
pub use spectral::SpectralEngine;
