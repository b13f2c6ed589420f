//! Recomputes the pinned `‖K‖_{L^q}` table by adaptive quadrature.
//!
//! Prints the table; pass `--write` to overwrite `data/bump_norms.txt`.

use cvquad::constants;
use cvquad::testfn::bump_power_integral_numeric;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut table = String::from(
        "# L^q norms of the unit-cube bump profile K(x) = K0(2x) on [-1/2, 1/2]^d.\n\
         # Regenerate with: cargo run --release --example pin_bump_norms\n",
    );
    let mut worst = 0.0f64;
    for d in 1..=2 {
        for q in 1..=6u32 {
            let norm = bump_power_integral_numeric(q, d, 1e-15)?.powf(1.0 / q as f64);
            if let Some(pinned) = constants::bump_norm(q, d) {
                worst = worst.max((norm / pinned - 1.0).abs());
            }
            table.push_str(&format!("{}={norm:.16e}\n", constants::bump_norm_key(q, d)));
        }
    }
    print!("{table}");
    eprintln!("largest relative deviation from the pinned table: {worst:.1e}");

    if std::env::args().any(|a| a == "--write") {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/bump_norms.txt");
        std::fs::write(path, &table)?;
        eprintln!("wrote {path}");
    }
    Ok(())
}
