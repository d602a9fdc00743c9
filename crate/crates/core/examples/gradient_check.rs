//! Compare tape gradients of a small discriminator with central differences.
//!
//! cargo run --release --example gradient_check -- [variant]

use hsigan::gan::{build_discriminator, loss, ArchConfig, PatchShape, Variant};
use hsigan::numerics::{Tape, Tensor};
use rand::SeedableRng;

fn objective(disc: &hsigan::gan::Discriminator, x: &Tensor) -> f64 {
    let logits = disc.logits(&mut Tape::inference(), x.clone()).unwrap();
    (0..logits.shape()[0]).map(|i| loss::loss_supervised(logits.row(i), 1).unwrap()).sum()
}

fn main() -> hsigan::Result<()> {
    let variant: Variant = std::env::args().nth(1).map_or(Ok(Variant::Ss), |s| s.parse())?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let arch = ArchConfig { spectral_width: 4, spatial_width: 6, ..ArchConfig::default() };
    let mut disc = build_discriminator(variant, 3, PatchShape { size: 5, bands: 8 }, &arch, &mut rng)?;
    let x = Tensor::randn(&[2, 5, 5, 8], 1.0, &mut rng);

    let mut tape = Tape::new();
    let logits = disc.logits(&mut tape, x.clone())?;
    let mut upstream = Tensor::zeros(logits.shape());
    for i in 0..logits.shape()[0] {
        let (_, g) = loss::loss_supervised_grad(logits.row(i), 1)?;
        upstream.row_mut(i).copy_from_slice(&g);
    }
    let grads = tape.backward(&disc.params, upstream)?;

    let h = 1e-4;
    println!("{variant}: parameter, analytic, numeric");
    let ids: Vec<_> = disc.params.ids().collect();
    for id in ids {
        if !disc.params.param(id).trainable {
            continue;
        }
        let name = disc.params.param(id).name.clone();
        let orig = disc.params.get(id).data()[0];
        disc.params.get_mut(id).data_mut()[0] = orig + h;
        let up = objective(&disc, &x);
        disc.params.get_mut(id).data_mut()[0] = orig - h;
        let down = objective(&disc, &x);
        disc.params.get_mut(id).data_mut()[0] = orig;
        let numeric = (up - down) / (2.0 * h);
        println!("  {name:<20} {:+.8e} {numeric:+.8e}", grads.params[id.index()].data()[0]);
    }
    Ok(())
}
