use photonlab::correlation::{histogram_all_pairs, histogram_start_stop, Binning};
use photonlab::model::merge_streams;
use photonlab::polarimetry::{
    degree_of_polarization, density_from_stokes, fidelity, polar_scan_intensity, project_physical,
    stokes_from_density, StokesVector,
};
use photonlab::rate_theory::{steady_state_ratio, EinsteinRates};
use photonlab::{validate_stream, Channel, EventStream, PhotonRecord, TimeStamp};
use proptest::prelude::*;

const DURATION: u64 = 1_000_000;

fn stream_on(channels: Vec<u8>, times: Vec<u64>) -> EventStream {
    let records = channels
        .iter()
        .zip(&times)
        .map(|(&c, &t)| PhotonRecord::new(TimeStamp(t), Channel(c)))
        .collect();
    EventStream::from_unsorted(records, TimeStamp(DURATION), [Channel(0), Channel(1)], "prop").unwrap()
}

fn arb_stream(max_len: usize) -> impl Strategy<Value = EventStream> {
    proptest::collection::vec((0u8..2, 0u64..=DURATION), 0..max_len).prop_map(|v| {
        let (c, t) = v.into_iter().unzip();
        stream_on(c, t)
    })
}

fn brute_all_pairs(s: &EventStream, b: &Binning) -> Vec<u64> {
    let n = ((b.tau_max_ps - b.tau_min_ps) / b.bin_width_ps as i64) as usize;
    let mut out = vec![0; n];
    for a in s.times_on(Channel(0)) {
        for z in s.times_on(Channel(1)) {
            let d = z as i64 - a as i64;
            if d >= b.tau_min_ps && d < b.tau_max_ps {
                out[((d - b.tau_min_ps) / b.bin_width_ps as i64) as usize] += 1;
            }
        }
    }
    out
}

fn arb_physical_stokes() -> impl Strategy<Value = StokesVector> {
    (0.0..=1.0f64, 0.0..std::f64::consts::PI, 0.0..std::f64::consts::TAU).prop_map(|(r, th, ph)| {
        StokesVector::normalized(r * th.sin() * ph.cos(), r * th.sin() * ph.sin(), r * th.cos())
    })
}

proptest! {
    #[test]
    fn merge_is_commutative_and_valid(a in arb_stream(60), b in arb_stream(60)) {
        let ab = merge_streams(&a, &b).unwrap();
        let ba = merge_streams(&b, &a).unwrap();
        prop_assert_eq!(ab.records(), ba.records());
        prop_assert_eq!(ab.len(), a.len() + b.len());
        prop_assert!(validate_stream(ab).is_ok());
    }

    #[test]
    fn all_pairs_matches_brute_force(s in arb_stream(80), bw in 1u64..50_000, lo in -200_000i64..0, span in 1i64..40) {
        let b = Binning { bin_width_ps: bw, tau_min_ps: lo, tau_max_ps: lo + span * bw as i64 };
        let h = histogram_all_pairs(&s, Channel(0), Channel(1), &b).unwrap();
        prop_assert_eq!(h.counts, brute_all_pairs(&s, &b));
    }

    #[test]
    fn start_stop_counts_each_start_at_most_once(s in arb_stream(80), bw in 1u64..50_000) {
        let b = Binning::forward(bw, 20 * bw as i64);
        let ss = histogram_start_stop(&s, Channel(0), Channel(1), &b).unwrap();
        let ap = histogram_all_pairs(&s, Channel(0), Channel(1), &b).unwrap();
        prop_assert!(ss.total() <= s.count_on(Channel(0)) as u64);
        prop_assert!(ss.total() <= ap.total());
    }

    #[test]
    fn histograms_are_shift_invariant(s in arb_stream(60), shift in 0u64..1_000_000) {
        let shifted = EventStream::new(
            s.records().iter().map(|r| PhotonRecord::new(TimeStamp(r.t.as_ps() + shift), r.channel)).collect(),
            TimeStamp(DURATION + shift),
            [Channel(0), Channel(1)],
            "shifted",
        ).unwrap();
        let b = Binning::symmetric(1000, 50_000);
        for f in [histogram_all_pairs, histogram_start_stop] {
            let x = f(&s, Channel(0), Channel(1), &b).unwrap();
            let y = f(&shifted, Channel(0), Channel(1), &b).unwrap();
            prop_assert_eq!(x.counts, y.counts);
        }
    }

    #[test]
    fn stokes_density_round_trip(s in arb_physical_stokes()) {
        let rho = density_from_stokes(&s).unwrap();
        let back = stokes_from_density(&rho);
        for (g, w) in back.components().iter().zip(s.components()) {
            prop_assert!((g - w).abs() < 1e-12);
        }
        let n = degree_of_polarization(&s);
        let [hi, lo] = rho.eigenvalues();
        prop_assert!((hi - 0.5 * (1.0 + n)).abs() < 1e-12);
        prop_assert!((lo - 0.5 * (1.0 - n)).abs() < 1e-12);
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded(a in arb_physical_stokes(), b in arb_physical_stokes()) {
        let (ra, rb) = (density_from_stokes(&a).unwrap(), density_from_stokes(&b).unwrap());
        let f = fidelity(&ra, &rb).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((f - fidelity(&rb, &ra).unwrap()).abs() < 1e-7);
    }

    #[test]
    fn projection_lands_in_ball(s1 in -3.0..3.0f64, s2 in -3.0..3.0f64, s3 in -3.0..3.0f64) {
        let s = StokesVector::normalized(s1, s2, s3);
        let p = project_physical(&s);
        prop_assert!(degree_of_polarization(&p.stokes) <= 1.0 + 1e-15);
        prop_assert_eq!(p.applied, degree_of_polarization(&s) > 1.0);
        prop_assert!(density_from_stokes(&p.stokes).is_ok());
    }

    #[test]
    fn polar_scan_periodic_and_positive(s in arb_physical_stokes(), theta in -10.0..10.0f64) {
        let i = polar_scan_intensity(&s, theta);
        prop_assert!(i >= -1e-15);
        prop_assert!((i - polar_scan_intensity(&s, theta + std::f64::consts::PI)).abs() < 1e-13);
    }

    #[test]
    fn steady_state_ratio_monotone(a in 1e-3..1e6f64, b in 1e-6..1e3f64, i in 0.0..1e12f64, di in 1e-3..1e3f64) {
        let r = EinsteinRates { a, b };
        let lo = steady_state_ratio(i, &r);
        let hi = steady_state_ratio(i * (1.0 + di) + di, &r);
        prop_assert!((0.0..1.0).contains(&lo));
        prop_assert!(hi >= lo);
    }
}
