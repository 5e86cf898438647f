#![no_main]
use ewens_hoeffding::montecarlo::SimulationConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(config) = serde_json::from_slice::<SimulationConfig>(data) {
        let _ = config.validate();
    }
});
