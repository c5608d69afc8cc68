use tomocov::basis::index::BasisIndexSet;
use tomocov::basis::omega_max_for;
use tomocov::basis::radial::{default_quad_order, RadialBasis};
use tomocov::projection::PixelMap;
use tomocov::simulate::add_noise;

fn desk_map() -> PixelMap {
    let index = BasisIndexSet::new(15);
    let basis = RadialBasis::build(15, omega_max_for(17), default_quad_order(15)).unwrap();
    PixelMap::build(65, &basis, &index).unwrap()
}

#[test]
fn noise_gram_diagonal_averages_to_c_q() {
    let map = desk_map();
    let g = map.noise_gram();
    let mean = (0..g.nrows()).map(|i| g[(i, i)].re).sum::<f64>() / g.nrows() as f64;
    assert!((mean - map.c_q()).abs() <= 0.1 * map.c_q(), "{mean} vs {}", map.c_q());
}

#[test]
fn white_pixel_noise_has_c_q_coefficient_variance() {
    let map = desk_map();
    let n = 2000;
    let mut images = vec![0.0f32; n * 65 * 65];
    add_noise(&mut images, 65, 1.0, 7);
    let coeffs = map.images_to_coeffs(&images).unwrap();
    let q_hat = coeffs[0].len();
    let mean = coeffs.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>() / (n * q_hat) as f64;
    assert!((mean - map.c_q()).abs() <= 0.15 * map.c_q(), "{mean} vs {}", map.c_q());
}
