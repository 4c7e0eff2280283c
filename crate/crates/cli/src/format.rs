/// Nine significant digits, trailing zeros dropped; scientific notation
/// outside `[1e-4, 1e9)`.
pub fn sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..9).contains(&exp) {
        return format!("{x:.8e}");
    }
    let decimals = (8 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::sig9;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig9(1.5), "1.5");
        assert_eq!(sig9(0.7192235935955849), "0.719223594");
        assert_eq!(sig9(2.5615528128088303), "2.56155281");
        assert_eq!(sig9(123456789.4), "123456789");
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(2.5e-12), "2.50000000e-12");
        assert_eq!(sig9(-3.0), "-3");
    }
}
