use latticenav::scenario::load_scenario;
use latticenav::sim::World;

fn main() {
    let sc = load_scenario(std::path::Path::new("scenarios/env1_swap20.toml")).unwrap();
    let mut world = World::new(
        sc.map.clone(),
        sc.heading_count,
        sc.turn_radius,
        sc.agents.clone(),
        sc.corridors.clone(),
        sc.params.clone(),
    )
    .unwrap();
    for step in 0..140 {
        world.step();
        if step >= 105 && step % 4 == 1 {
            for i in [1usize, 4, 10] {
                eprintln!("step {step:3} A{i} {}", world.debug_agent(i));
            }
            eprintln!();
        }
        if world.all_terminal() {
            break;
        }
    }
}
