//! Dense tensors and the differentiable primitives the model is built from.
//!
//! Every primitive has an explicit backward function; there is no tape.

mod conv;
mod gradcheck;
mod gru;
mod ops;
mod params;
mod tensor;

pub use conv::{conv2d, conv2d_backward};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport, TensorCheck};
pub use gru::{
    gru_cell, gru_sequence, gru_sequence_backward, GruParams, GruSequenceGrad, GRU_PARAM_NAMES,
};
pub use ops::{
    affine, affine_backward, softmax, softmax_backward, softmax_values, Activation, AffineGrad,
    LEAKY_SLOPE,
};
pub use params::{GradPair, ParamStore};
pub use tensor::Tensor;

pub(crate) use conv::{conv2d_backward_raw, conv2d_raw, ConvShape};
pub(crate) use gru::{gru_step, gru_step_backward, GruGradBuf, GruStepCache, GruView};
pub(crate) use ops::{softmax_backward_slice, softmax_slice};
pub(crate) use tensor::{matvec, matvec_t_acc, outer_acc};
