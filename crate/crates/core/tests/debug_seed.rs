mod common;
use common::random_instance;
use svc_lbp::model::Mode;
use svc_lbp::lbp::plan_offline_skip;

#[test]
#[ignore]
fn dump_seed() {
    let seed: u64 = std::env::var("SEED").unwrap().parse().unwrap();
    let mode = if std::env::var("NOSKIP").is_ok() { Mode::NoSkip } else { Mode::Skip };
    let inst = random_instance(seed, mode);
    eprintln!("C={} L={} s={} Bm={}", inst.spec.num_chunks, inst.spec.chunk_duration_slots,
        inst.config.startup_delay, inst.config.buffer_capacity);
    for n in 0..inst.spec.num_layers() {
        let v: Vec<u64> = (0..inst.spec.num_chunks).map(|i| inst.spec.layer_kb(n, i)).collect();
        eprintln!("layer {}: {:?}", n, v);
    }
    eprintln!("trace: {:?}", inst.trace.capacities);
    let deadlines: Vec<u64> = (1..=inst.spec.num_chunks).map(|i|
        svc_lbp::model::deadline_of(i, inst.spec.chunk_duration_slots, inst.config.startup_delay).unwrap()).collect();
    eprintln!("deadlines: {:?}", deadlines);
    if mode == Mode::Skip {
        let plan = plan_offline_skip(&inst.spec, &inst.config, &inst.trace).unwrap();
        eprintln!("plan levels: {:?}", plan.levels);
        eprintln!("plan t: {:?}", plan.lower_deadline);
        eprintln!("plan a: {:?}", plan.head_fetch);
        eprintln!("plan e: {:?}", plan.residual_bw);
    }
}
