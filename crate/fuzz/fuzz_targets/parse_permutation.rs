#![no_main]
use ewens_hoeffding::Permutation;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(pi) = text.parse::<Permutation>() {
        // Anything accepted must print back to itself.
        assert_eq!(pi.to_string().parse::<Permutation>().unwrap(), pi);
        let d = pi.cycles();
        assert_eq!(d.cycle_count(), pi.cycle_count());
    }
});
