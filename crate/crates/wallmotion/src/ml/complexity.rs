//! Multiplication-count estimate for convolutional back-propagation.

use super::{CnnDims, CnnParams, MlError};

/// Multiplications per back-propagation pass over `L` convolutional layers.
///
/// `connections[l]` is the connection count `N_l` between layers
/// (`L + 1` entries), `kernels[l]` the filter size `K_l` and `lengths[l]`
/// the signal width `V_l` entering layer `l` (`L` entries each). The total
/// is the sum of three per-layer products:
///
/// ```text
/// sum_{l=1..L}   N_{l-1} N_l V_{l-1} K_{l-1}^2
/// + sum_{l=0..L-1} N_{l+1} N_l (K_l + V_l) K_l^2
/// + sum_{l=0..L-1} N_{l+1} N_l K_l (K_l + V_l)^2
/// ```
pub fn conv_backprop_multiplications(
    connections: &[u64],
    kernels: &[u64],
    lengths: &[u64],
) -> Result<u64, MlError> {
    let layers = kernels.len();
    if connections.len() != layers + 1 || lengths.len() != layers {
        return Err(MlError::InvalidHyperparameter(format!(
            "complexity arrays disagree: {} connections, {} kernels, {} lengths",
            connections.len(),
            layers,
            lengths.len()
        )));
    }
    let mul = |a: u64, b: u64| a.checked_mul(b).ok_or(MlError::Overflow);
    let mut total: u64 = 0;
    for l in 1..=layers {
        let term = mul(
            mul(connections[l - 1], connections[l])?,
            mul(lengths[l - 1], mul(kernels[l - 1], kernels[l - 1])?)?,
        )?;
        total = total.checked_add(term).ok_or(MlError::Overflow)?;
    }
    for l in 0..layers {
        let kv = kernels[l].checked_add(lengths[l]).ok_or(MlError::Overflow)?;
        let term = mul(
            mul(connections[l + 1], connections[l])?,
            mul(kv, mul(kernels[l], kernels[l])?)?,
        )?;
        total = total.checked_add(term).ok_or(MlError::Overflow)?;
    }
    for l in 0..layers {
        let kv = kernels[l].checked_add(lengths[l]).ok_or(MlError::Overflow)?;
        let term = mul(
            mul(connections[l + 1], connections[l])?,
            mul(kernels[l], mul(kv, kv)?)?,
        )?;
        total = total.checked_add(term).ok_or(MlError::Overflow)?;
    }
    Ok(total)
}

/// Estimate for the two-conv-layer architecture: one input channel fans
/// out to `filters` connections per layer, and the signal widths are the
/// input length and the first pooled length.
pub fn arch_multiplications(input_len: usize, params: &CnnParams) -> Result<u64, MlError> {
    let dims = CnnDims::for_arch(input_len, params)?;
    let f = params.filters as u64;
    let k = params.kernel_size as u64;
    conv_backprop_multiplications(
        &[1, f, f],
        &[k, k],
        &[dims.input_len as u64, dims.pool1_out as u64],
    )
}
