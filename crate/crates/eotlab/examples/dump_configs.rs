// Regenerate the shipped example configurations from the presets.

use eotlab::config::{presets, DetachConfig, DomainSpec};

fn main() {
    let dir = std::path::Path::new("configs");
    std::fs::create_dir_all(dir).unwrap();
    for (name, cfg) in [
        ("instance_a", presets::instance_a()),
        ("instance_b", presets::instance_b()),
        ("instance_c", presets::instance_c()),
        ("instance_d", presets::instance_d()),
    ] {
        std::fs::write(dir.join(format!("{name}.cfg")), cfg.serialize()).unwrap();
    }

    let mut square = presets::instance_a();
    square.instance.id = "detach-square".into();
    square.detach = Some(DetachConfig {
        domain: DomainSpec::Box(vec![(0.0, 1.0), (0.0, 1.0)]),
        ratio_floor: 0.05,
        ..DetachConfig::default()
    });
    std::fs::write(dir.join("detach_square.cfg"), square.serialize()).unwrap();

    let mut disk = presets::instance_a();
    disk.instance.id = "detach-disk".into();
    disk.detach = Some(DetachConfig {
        domain: DomainSpec::RegularPolygon {
            center: [0.0, 0.0],
            radius: 1.0,
            segments: 64,
        },
        checks: vec!["prop31".into()],
        ratio_floor: 0.3,
        ..DetachConfig::default()
    });
    std::fs::write(dir.join("detach_disk.cfg"), disk.serialize()).unwrap();

    let mut quad = presets::instance_a();
    quad.instance.id = "detach-quadratic".into();
    quad.detach = Some(DetachConfig {
        checks: vec!["quadratic".into()],
        ..DetachConfig::default()
    });
    std::fs::write(dir.join("detach_quadratic.cfg"), quad.serialize()).unwrap();
    println!("configs written");
}
