//! Shot-noise tunnel junction calibration of the chain gain and added noise.
//!
//! `cargo run --example sntj_calibration [-- out.csv]` also writes the noisy
//! table in the `bias_volt,psd_watt` format read by `jpa-sim calibrate`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use jpa_sim::noise::{calibration_psd, fit_calibration, SntjParams};

fn main() -> jpa_sim::Result<()> {
    let p = SntjParams::new(0.03, 6e9, 1e6)?;
    let (gain_db, added) = (96.0, 15.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 0.01).expect("valid deviation");
    let data: Vec<(f64, f64)> = (0..=40)
        .map(|i| {
            let v = -1e-3 + 2e-3 * i as f64 / 40.0;
            (
                v,
                calibration_psd(&p, gain_db, added, v) * (1.0 + noise.sample(&mut rng)),
            )
        })
        .collect();

    if let Some(path) = std::env::args().nth(1) {
        let mut text = String::from("bias_volt,psd_watt\n");
        for (v, psd) in &data {
            text.push_str(&format!("{v:.16e},{psd:.16e}\n"));
        }
        std::fs::write(&path, text)?;
        println!("wrote {path}");
    }

    let r = fit_calibration(&data, &p)?;
    println!("injected: gain {gain_db} dB, added {added} quanta (1% PSD noise)");
    println!(
        "fitted:   gain {:.3} dB, added {:.2} quanta, CI [{:.2}, {:.2}], residual rms {:.2e}",
        r.system_gain_db, r.added_quanta, r.added_quanta_ci.0, r.added_quanta_ci.1, r.residual_rms
    );
    Ok(())
}
