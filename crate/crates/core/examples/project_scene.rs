//! Projects lake points through the demo camera and reports which are on
//! screen. Pass a scene file to use another camera.

use mrsls::scenegeo::{in_viewport, project, SceneConfig, Vec2, WorldPoint};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scene = match std::env::args().nth(1) {
        Some(path) => SceneConfig::load(path.as_ref())?,
        None => SceneConfig::demo(),
    };
    let camera = scene.camera();
    println!("{} ({}x{})", scene.name(), camera.image_size[0], camera.image_size[1]);
    for (x, y) in [(0.0, 8.0), (0.0, 20.0), (-15.0, 12.0), (25.0, 12.0), (40.0, 60.0), (0.0, -3.0)] {
        let p = WorldPoint::on_water(Vec2::new(x, y));
        let on_lake = scene.lake().contains(Vec2::new(x, y));
        match project(camera, p) {
            Some(px) => println!(
                "({x:6.1}, {y:5.1}) -> ({:8.2}, {:8.2}) depth {:6.2} lake {on_lake} visible {}",
                px.u,
                px.v,
                camera.depth(p),
                in_viewport(camera, scene.viewport(), p)
            ),
            None => println!("({x:6.1}, {y:5.1}) is behind the camera"),
        }
    }
    Ok(())
}
