//! Runs the entity simulation alone: four lotuses placed close together,
//! one random dash and one hit, then prints positions and what happened.

use mrsls::chatparse::ViewerId;
use mrsls::entitysim::{Effect, LotusColor, SimState};
use mrsls::scenegeo::{SceneConfig, Vec2};

fn main() {
    let scene = SceneConfig::demo();
    let mut sim = SimState::new(7, 30);
    let names = ["ada", "bo", "chen", "dai"];
    let viewers: Vec<ViewerId> = (1..=names.len()).map(|i| ViewerId::new(format!("v{i}"))).collect();
    let spots = [(0.0, 15.0), (3.0, 15.0), (6.0, 15.3), (-3.0, 18.0)];
    for (i, (viewer, name)) in viewers.iter().zip(names).enumerate() {
        sim.touch_viewer(viewer, name, i as u64);
        let (x, y) = spots[i];
        sim.insert_lotus(&scene, viewer, Vec2::new(x, y), LotusColor::ALL[i]);
    }
    sim.dash_lotus(&scene, &viewers[0], None).unwrap();
    sim.dash_lotus(&scene, &viewers[1], Some("chen")).unwrap();
    sim.shine_lotus(&scene, &viewers[3]).unwrap();

    let mut impacts = 0;
    for _ in 0..sim.ticks_for(10.0) {
        for effect in sim.step(&scene) {
            match effect {
                Effect::Collision { a, b, impact } => {
                    impacts += 1;
                    println!(
                        "tick {}: {a} hit {b}, energy {:.3} -> {:.3}",
                        sim.tick(),
                        impact.energy_before,
                        impact.energy_after
                    );
                }
                Effect::Despawned { id, kind, reason } => {
                    println!("tick {}: {kind} {id} gone ({reason:?})", sim.tick())
                }
                Effect::Shore { id } => println!("tick {}: lotus {id} bounced off the shore", sim.tick()),
                _ => {}
            }
        }
    }
    println!("after {} ticks, {impacts} impacts:", sim.tick());
    for (id, lotus) in sim.lotuses() {
        println!(
            "  {id} {:<5} {:?} at ({:.2}, {:.2})",
            sim.display_name(&lotus.owner),
            lotus.color,
            lotus.position.x,
            lotus.position.y
        );
    }
}
