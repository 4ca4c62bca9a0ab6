//! Two independent hashes joined by an injective pairing collide with the
//! product of their individual collision probabilities.

use storm::lsh::{
    augment_data, augment_query, collision_probability_srp, compose_product, HashConfig, HashFamily,
};
use storm::Sketch;

fn main() -> storm::Result<()> {
    println!(
        "pairing 4-bucket codes: (1,2) -> {}, (2,1) -> {}",
        compose_product(1, 4, 2, 4)?,
        compose_product(2, 4, 1, 4)?
    );

    let b = augment_data(&[0.3, -0.2, 0.5])?;
    let q = augment_query(&[0.4, 0.1, 0.6])?;
    let per_bit = collision_probability_srp(&b, &q)?;
    let bits = 2u8;
    let expected = per_bit.powi(2 * bits as i32);

    let config = HashConfig::new(HashFamily::Composed, bits, 4, 77)?;
    let mut sketch = Sketch::new(config, 20_000)?;
    sketch.insert(&b)?;
    println!(
        "single-bit rate {per_bit:.4}; product of two {bits}-bit hashes: expected {expected:.4}, sketch {:.4}",
        sketch.estimate(&q)?.value
    );
    Ok(())
}
