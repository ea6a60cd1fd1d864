use qadapos::geometry::{BeaconSet, Pose};
use qadapos::qada::CalibrationParams;
use qadapos::signals::*;
use std::time::Instant;

fn main() {
    let book = gen_codes(CodeFamily::Kasami, 1023, 4, 7).unwrap()
        .with_samples_per_chip(64).unwrap();
    let beacons = BeaconSet::ceiling_square(1.2, 3.4);
    let cal = CalibrationParams::reference();
    let pose = Pose::new(0.3, -0.2, 0.0, 0.0, 0.0, 1.0);
    println!("period samples: {}", book.period_samples());

    let t0 = Instant::now();
    let mut trials = 0;
    for seed in 0..20u64 {
        for b in beacons.beacons() {
            let cap = synthesize_capture(std::slice::from_ref(b), &pose, &cal, &book, 10.0,
                AmplitudeModel::default(), seed).unwrap();
            let tri = correlate(&cap, book.code(b.id).unwrap(), book.samples_per_chip).unwrap();
            let est = extract_ratios(&tri, book.samples_per_chip, RatioRule::SignedPeak).unwrap();
            std::hint::black_box(est);
        }
        trials += 1;
    }
    let dt = t0.elapsed();
    println!("{} trials in {:?} -> {:.1} ms/trial", trials, dt, dt.as_secs_f64()*1000.0/trials as f64);
}
