//! Kullback–Leibler functionals on gridded densities and products of
//! transition kernels.

mod concentration;
mod kl;
mod product;
mod random;

pub use concentration::{
    concentration_experiment, sample_cells, sample_points, trig_dictionary, ConcentrationConfig,
    ConcentrationRow, ConcentrationTable, TailRow,
};
pub use kl::{kl_divergence, kl_divergence_values, l2_kl_base_check, BoundMargin};
pub use product::{
    err_tau, kl_l2_bound_check, kl_pi_tau, product_density, s_tau_density, ErrTau, KernelStack,
    ProductDensity, MAX_PRODUCT_CELLS, MAX_PRODUCT_STEPS,
};
pub use random::{random_density, random_kernel, random_kernel_stack, sinkhorn_balance};
