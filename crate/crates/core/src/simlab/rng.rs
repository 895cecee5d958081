use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent reproducible stream `stream` under `seed`.
///
/// ChaCha8 is counter based, so the pair `(seed, stream)` fixes the output
/// on every platform regardless of how many other streams exist.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
