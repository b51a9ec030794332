/// Central finite-difference gradient. Component `i` uses the step
/// `eps * max(1, |p_i|)`.
pub fn fd_gradient<F>(objective: F, params: &[f64], eps: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = params.to_vec();
    (0..params.len())
        .map(|i| {
            let h = eps * params[i].abs().max(1.0);
            probe[i] = params[i] + h;
            let up = objective(&probe);
            probe[i] = params[i] - h;
            let down = objective(&probe);
            probe[i] = params[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}
