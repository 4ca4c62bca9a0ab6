//! Tabulates the regression surrogate, its slope and curvature for several
//! hash widths, and the classification margin loss.

use storm::surrogate::{classification_loss, hessian_coefficient, prp_loss, prp_loss_slope};

fn main() -> storm::Result<()> {
    let ps = [1u32, 2, 4, 8];
    println!("regression surrogate (1/2) f(t)^p + (1/2) f(-t)^p");
    println!(
        "{:>6} {}",
        "t",
        ps.map(|p| format!("{:>10}", format!("p={p}"))).concat()
    );
    for i in -4..=4 {
        let t = i as f64 * 0.2;
        let row: String = ps
            .iter()
            .map(|&p| format!("{:>10.5}", prp_loss(t, p)))
            .collect();
        println!("{t:>6.2} {row}");
    }

    println!("\nslope and curvature at t = 0.1");
    for p in [2u32, 4, 8, 16] {
        println!(
            "p={p:<3} slope {:.6}  curvature {:.6}",
            prp_loss_slope(0.1, p)?,
            hessian_coefficient(0.1, p)?
        );
    }

    println!("\nclassification loss (2 f(-t))^p");
    for i in -4..=4 {
        let t = i as f64 * 0.25;
        let row: String = [1u32, 2, 4]
            .iter()
            .map(|&p| format!("{:>10.4}", classification_loss(t, p)))
            .collect();
        println!("{t:>6.2} {row}");
    }
    Ok(())
}
