#![no_main]

use libfuzzer_sys::fuzz_target;
use shfd::synth::ForgeryGroundTruth;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(truth) = ForgeryGroundTruth::from_json(text) {
        let p = truth.source_rect.center();
        let back = truth.inverse(truth.forward(p));
        assert!((back[0] - p[0]).abs() < 1e-6 * (1.0 + p[0].abs()));
        assert!((back[1] - p[1]).abs() < 1e-6 * (1.0 + p[1].abs()));
    }
});
