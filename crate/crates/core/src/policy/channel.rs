use alloc::vec::Vec;

use crate::info::ChannelMatrix;
use crate::model::{sample_index, GridTrace, LoadTrace};
use crate::{rng_from_seed, Error, Result};

/// Draws each `Y_t` independently from `p(· | x_t)`. The gap `x_t - y_t`
/// is supplied by the renewable source, so there is no battery state to
/// track; the channel must keep `0 <= x - y <= peak`.
pub fn memoryless_channel_policy(
    trace: &LoadTrace,
    channel: &ChannelMatrix,
    peak: f64,
    seed: u64,
) -> Result<GridTrace> {
    channel.check_support(peak)?;
    let mut rng = rng_from_seed(seed);
    let y: Vec<f64> = trace
        .load()
        .iter()
        .enumerate()
        .map(|(slot, x)| {
            let i = channel
                .input_index(*x)
                .ok_or(Error::NotInAlphabet { slot, value: *x })?;
            Ok(channel.outputs()[sample_index(channel.row(i), &mut rng)])
        })
        .collect::<Result<_>>()?;
    Ok(GridTrace::new(y))
}
