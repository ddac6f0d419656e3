/// A float with 17 significant digits, positional when the exponent is moderate.
pub fn g17(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..16).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.16e}")
    }
}

#[cfg(test)]
mod tests {
    use super::g17;

    #[test]
    fn seventeen_digits() {
        assert_eq!(g17(16f64.ln()), "2.7725887222397811");
        assert_eq!(g17(-0.125), "-0.12500000000000000");
        assert_eq!(g17(1e-9), "1.0000000000000001e-9");
        assert_eq!(g17(0.0), "0");
    }
}
