//! Prints the layer-by-layer shape trace of the default network on one
//! (8,8,3,32,32) input.

use lfdk::{DKNet, DKNetConfig, Dims5, LightField};

fn main() -> lfdk::Result<()> {
    let net = DKNet::<f32>::build(DKNetConfig::default(), 0)?;
    let x = LightField::<f32>::filled(Dims5::new(8, 8, 3, 32, 32), 0.5);
    let (_, trace) = net.forward_traced(&x)?;
    for row in &trace {
        println!("{row}");
    }
    Ok(())
}
