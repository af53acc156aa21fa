fn main() {
    use jamsense::sim::*;
    let mut scenario = Scenario::new(ScenarioKind::MaterialsSpheres);
    scenario.poses_per_object = 2;
    scenario.samples_per_pose = 1;
    let config = GripperConfig::default();
    let dataset = generate_dataset(&scenario, &config, 17).unwrap();
    let json = serde_json::to_string_pretty(&dataset.manifest).unwrap();
    let back: Manifest = serde_json::from_str(&json).unwrap();
    if back != dataset.manifest {
        let json2 = serde_json::to_string_pretty(&back).unwrap();
        for (a, b) in json.lines().zip(json2.lines()) {
            if a != b { println!("orig: {a}\nback: {b}"); }
        }
        println!("JSON equal: {}", json == json2);
    } else { println!("manifests equal"); }
}
