"""Regenerate src/tabletop_agent/data/env*.json.

Layouts, attribute tables and instruction texts are authored here; the
ground-truth lines are produced by replaying each task's pick/get_pose/place
steps through the simulator so they are always in canonical rendering.

    python scripts/build_corpus.py
"""

from __future__ import annotations

import json
from pathlib import Path

from tabletop_agent.world import IDENTITY, world_from_layout

OUT = Path(__file__).resolve().parents[1] / "src" / "tabletop_agent" / "data"
VERSION = "1.0"
HOME = {"position": [0.2, 0.0, 0.3], "orientation": [0.0, 0.0, 1.0, 0.0]}


def obj(name, kind, xyz, **attributes):
    entry = {"name": name, "kind": kind, "pose": {"position": list(xyz), "orientation": list(IDENTITY)}}
    if kind == "container":
        entry["footprint_radius"] = 0.08
    entry["attributes"] = attributes
    return entry


def ref(phrase, select, expect, attribute=None, value=None, rank=None, count=None):
    out = {"phrase": phrase, "select": select}
    if attribute is not None:
        out["attribute"] = attribute
    if value is not None:
        out["value"] = value
    if rank is not None:
        out["rank"] = rank
    if count is not None:
        out["count"] = count
    out["expect"] = expect
    return out


ENVIRONMENTS = {
    1: {
        "name": "kitchen_utensils",
        "objects": [
            obj("spoon", "item", (0.25, -0.20, 0.02), category="utensil", use="eating", material="metal", weight_kg=0.04),
            obj("spatula", "item", (0.45, -0.25, 0.02), category="utensil", use="cooking", material="plastic", weight_kg=0.08),
            obj("coke", "item", (0.35, 0.00, 0.06), category="drink", use="drinking", material="aluminum", weight_kg=0.35),
            obj("basket", "container", (0.40, 0.30, 0.00), category="container"),
        ],
        "tasks": [
            {
                "task_id": 1,
                "order_constrained": False,
                "steps": [("spoon", "basket", "in"), ("coke", "basket", "in"), ("spatula", "basket", "in")],
                "instances": [
                    ("CAN", "Move the spoon, the coke, and the spatula to the basket.", []),
                    ("LEX", "Shift the teaspoon, the soda can, and the turner to the hamper.", []),
                    ("SYN", "The spoon, the coke, and the spatula should all be moved to the basket.", []),
                    ("SEM", "ugh my counter is a mess, could u just throw the spoon, coke and spatula into the basket? thx", []),
                    ("HLR", "Clear the table by putting all the loose items into the basket.", [
                        ref("all the loose items", "all", ["coke", "spatula", "spoon"]),
                    ]),
                    ("HLR", "Put both kitchen utensils and the drink into the basket.", [
                        ref("both kitchen utensils", "eq", ["spatula", "spoon"], attribute="category", value="utensil"),
                        ref("the drink", "eq", ["coke"], attribute="category", value="drink"),
                    ]),
                ],
            },
            {
                "task_id": 2,
                "order_constrained": True,
                "steps": [("coke", "basket", "in"), ("spoon", "basket", "in")],
                "instances": [
                    ("CAN", "Move the coke to the basket first, and then move the spoon to the basket.", []),
                    ("LEX", "First transfer the soda can to the hamper, then transfer the teaspoon to the hamper.", []),
                    ("SYN", "After the coke has been put in the basket, the spoon should go in the basket too.", []),
                    ("SEM", "hey, drink first pls: coke into the basket, and after that the spoon goes in there too :)", []),
                    ("HLR", "First put the beverage in the basket, then the utensil you would eat soup with.", [
                        ref("the beverage", "eq", ["coke"], attribute="category", value="drink"),
                        ref("the utensil you would eat soup with", "eq", ["spoon"], attribute="use", value="eating"),
                    ]),
                    ("HLR", "Start with the heaviest object and then the lightest object, putting both in the basket.", [
                        ref("the heaviest object", "max", ["coke"], attribute="weight_kg"),
                        ref("the lightest object", "min", ["spoon"], attribute="weight_kg"),
                    ]),
                ],
            },
            {
                "task_id": 3,
                "order_constrained": False,
                "steps": [("spoon", "coke", "left_of"), ("spatula", "coke", "right_of")],
                "instances": [
                    ("CAN", "Place the spoon to the left of the coke and the spatula to the right of the coke.", []),
                    ("LEX", "Set the teaspoon on the left side of the soda can and the turner on the right side of the soda can.", []),
                    ("SYN", "To the left of the coke goes the spoon, and to the right of the coke goes the spatula.", []),
                    ("SEM", "can u tidy up a bit? spoon on the coke's left, spatula on its right, ty!!", []),
                    ("HLR", "Put the eating utensil to the left of the drink and the cooking utensil to its right.", [
                        ref("the eating utensil", "eq", ["spoon"], attribute="use", value="eating"),
                        ref("the drink", "eq", ["coke"], attribute="category", value="drink"),
                        ref("the cooking utensil", "eq", ["spatula"], attribute="use", value="cooking"),
                    ]),
                    ("HLR", "Place the lightest object left of the heaviest one and the plastic object right of the heaviest one.", [
                        ref("the lightest object", "min", ["spoon"], attribute="weight_kg"),
                        ref("the heaviest one", "max", ["coke"], attribute="weight_kg"),
                        ref("the plastic object", "eq", ["spatula"], attribute="material", value="plastic"),
                    ]),
                ],
            },
        ],
    },
    2: {
        "name": "boxes",
        "objects": [
            obj("cardboard_box", "item", (0.25, -0.25, 0.03), material="cardboard", weight_kg=0.2, size_m=0.30, magnetic=False),
            obj("wooden_box", "item", (0.45, -0.30, 0.03), material="wood", weight_kg=1.5, size_m=0.20, magnetic=False),
            obj("metal_box", "item", (0.35, 0.00, 0.03), material="metal", weight_kg=3.0, size_m=0.15, magnetic=True),
            obj("container", "container", (0.40, 0.30, 0.00)),
        ],
        "tasks": [
            {
                "task_id": 1,
                "order_constrained": False,
                "steps": [("cardboard_box", "container", "in"), ("wooden_box", "container", "in")],
                "instances": [
                    ("CAN", "Put the cardboard box and the wooden box in the container.", []),
                    ("LEX", "Place the paper box and the timber crate inside the receptacle.", []),
                    ("SYN", "Can you put the cardboard box and the wooden box in the container?", []),
                    ("SEM", "ok so I'm packing up, could you stick the cardboard box n the wooden box in the container real quick", []),
                    ("HLR", "Put the two lightest boxes in the container.", [
                        ref("the two lightest boxes", "min", ["cardboard_box", "wooden_box"], attribute="weight_kg", count=2),
                    ]),
                    ("HLR", "Put every box that is not made of metal into the container.", [
                        ref("every box that is not made of metal", "ne", ["cardboard_box", "wooden_box"], attribute="material", value="metal"),
                    ]),
                ],
            },
            {
                "task_id": 2,
                "order_constrained": True,
                "steps": [("metal_box", "container", "in"), ("wooden_box", "container", "in")],
                "instances": [
                    ("CAN", "Move the metal box to the container first, followed by the wooden box.", []),
                    ("LEX", "First shift the steel box to the receptacle, followed by the timber box.", []),
                    ("SYN", "The metal box goes into the container first, and the wooden box goes in after it.", []),
                    ("SEM", "order matters here!! metal box in the container first, then the wooden one, thanks a bunch", []),
                    ("HLR", "Put the heaviest box in the container first, then the second heaviest one.", [
                        ref("the heaviest box", "max", ["metal_box"], attribute="weight_kg"),
                        ref("the second heaviest one", "max", ["wooden_box"], attribute="weight_kg", rank=2),
                    ]),
                    ("HLR", "First put the magnetic box in the container, then the box made of wood.", [
                        ref("the magnetic box", "eq", ["metal_box"], attribute="magnetic", value=True),
                        ref("the box made of wood", "eq", ["wooden_box"], attribute="material", value="wood"),
                    ]),
                ],
            },
            {
                "task_id": 3,
                "order_constrained": False,
                "steps": [("cardboard_box", "metal_box", "left_of"), ("wooden_box", "metal_box", "right_of")],
                "instances": [
                    ("CAN", "Place the cardboard box to the left of the metal box and the wooden box to the right of the metal box.", []),
                    ("LEX", "Set the carton on the left side of the steel box and the timber box on the right side of the steel box.", []),
                    ("SYN", "To the left of the metal box the cardboard box should be placed, while the wooden box should be placed to its right.", []),
                    ("SEM", "pls arrange these for me: cardboard box left of the metal box, wooden box on the right side of it. cheers", []),
                    ("HLR", "Place the lightest box to the left of the heaviest box and the medium-weight box to its right.", [
                        ref("the lightest box", "min", ["cardboard_box"], attribute="weight_kg"),
                        ref("the heaviest box", "max", ["metal_box"], attribute="weight_kg"),
                        ref("the medium-weight box", "max", ["wooden_box"], attribute="weight_kg", rank=2),
                    ]),
                    ("HLR", "Put the biggest box to the left of the smallest box, and the box made from trees to the right of the smallest box.", [
                        ref("the biggest box", "max", ["cardboard_box"], attribute="size_m"),
                        ref("the smallest box", "min", ["metal_box"], attribute="size_m"),
                        ref("the box made from trees", "eq", ["wooden_box"], attribute="material", value="wood"),
                    ]),
                ],
            },
        ],
    },
    3: {
        "name": "fruits",
        "objects": [
            obj("strawberry", "item", (0.25, 0.05, 0.02), color="red", sourness=2, size_cm=3, calories=4, weight_g=12),
            obj("plum", "item", (0.30, -0.15, 0.02), color="purple", sourness=5, size_cm=5, calories=30, weight_g=45),
            obj("lemon", "item", (0.45, 0.05, 0.03), color="yellow", sourness=9, size_cm=7, calories=17, weight_g=100),
            obj("peach", "item", (0.50, -0.15, 0.04), color="orange", sourness=3, size_cm=8, calories=59, weight_g=150),
            obj("bowl", "container", (0.40, 0.30, 0.00)),
            obj("trash", "container", (0.40, -0.35, 0.00)),
        ],
        "tasks": [
            {
                "task_id": 1,
                "order_constrained": False,
                "steps": [("lemon", "trash", "in"), ("peach", "trash", "in")],
                "instances": [
                    ("CAN", "Pick up the lemon and peach and place them in the trash.", []),
                    ("LEX", "Grab the lemon and peach and throw them in the garbage.", []),
                    ("SYN", "Can you pick up the lemon and peach and place them in the trash?", []),
                    ("SEM", "Hey! these fruits are rot! toss the lemon and peach in the bin", []),
                    ("HLR", "Pick up the sourest and the biggest fruits and place them in the bin", [
                        ref("the sourest", "max", ["lemon"], attribute="sourness"),
                        ref("the biggest", "max", ["peach"], attribute="size_cm"),
                    ]),
                    ("HLR", "Throw the yellow fruit and the heaviest fruit in the trash.", [
                        ref("the yellow fruit", "eq", ["lemon"], attribute="color", value="yellow"),
                        ref("the heaviest fruit", "max", ["peach"], attribute="weight_g"),
                    ]),
                ],
            },
            {
                "task_id": 2,
                "order_constrained": False,
                "steps": [("strawberry", "bowl", "in"), ("plum", "bowl", "in")],
                "instances": [
                    ("CAN", "Pick up the strawberry and the plum and place them in the bowl.", []),
                    ("LEX", "Grab the strawberry and the plum and set them in the dish.", []),
                    ("SYN", "The strawberry and the plum should be picked up and placed in the bowl.", []),
                    ("SEM", "I'm making a smoothie, so pls put the strawbery and the plum in the bowl for me", []),
                    ("HLR", "Put the smallest fruit and the purple fruit in the bowl.", [
                        ref("the smallest fruit", "min", ["strawberry"], attribute="size_cm"),
                        ref("the purple fruit", "eq", ["plum"], attribute="color", value="purple"),
                    ]),
                    ("HLR", "Put the two lightest fruits in the bowl.", [
                        ref("the two lightest fruits", "min", ["plum", "strawberry"], attribute="weight_g", count=2),
                    ]),
                ],
            },
            {
                "task_id": 3,
                "order_constrained": True,
                "steps": [("peach", "bowl", "in"), ("plum", "trash", "in")],
                "instances": [
                    ("CAN", "Put the peach in the bowl first, and then put the plum in the trash.", []),
                    ("LEX", "First set the peach in the dish, and afterwards toss the plum in the garbage.", []),
                    ("SYN", "After the peach has been placed in the bowl, the plum should be placed in the trash.", []),
                    ("SEM", "peach goes in the bowl FIRST ok? then get rid of that old plum, trash it", []),
                    ("HLR", "First put the heaviest fruit in the bowl, then throw the purple fruit in the trash.", [
                        ref("the heaviest fruit", "max", ["peach"], attribute="weight_g"),
                        ref("the purple fruit", "eq", ["plum"], attribute="color", value="purple"),
                    ]),
                    ("HLR", "Start by putting the most caloric fruit in the bowl, then throw the second sourest fruit in the trash.", [
                        ref("the most caloric fruit", "max", ["peach"], attribute="calories"),
                        ref("the second sourest fruit", "max", ["plum"], attribute="sourness", rank=2),
                    ]),
                ],
            },
        ],
    },
}


def ground_truth(env_id: int, layout: dict, steps) -> list[str]:
    world = world_from_layout(env_id, layout)
    for item, reference, relation in steps:
        world.pick(item)
        target = world.get_pose(reference, relation)
        world.place(target.data)
    assert all(r.ok for r in world.trace), [r.render() for r in world.trace]
    return [r.render() for r in world.trace]


def build(env_id: int, spec: dict) -> dict:
    layout = {"home_pose": HOME, "objects": spec["objects"]}
    tasks = []
    for task in spec["tasks"]:
        hlr = 0
        instances = []
        for category, text, referents in task["instances"]:
            if category == "HLR":
                hlr += 1
                key = f"e{env_id}t{task['task_id']}-HLR{hlr}"
            else:
                key = f"e{env_id}t{task['task_id']}-{category}"
            inst = {"id": key, "category": category, "instruction": text}
            if referents:
                inst["referents"] = referents
            instances.append(inst)
        tasks.append({
            "task_id": task["task_id"],
            "order_constrained": task["order_constrained"],
            "ground_truth": ground_truth(env_id, layout, task["steps"]),
            "instances": instances,
        })
    return {
        "format": "tabletop-agent-corpus",
        "version": VERSION,
        "env_id": env_id,
        "name": spec["name"],
        "layout": layout,
        "tasks": tasks,
    }


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    for env_id, spec in ENVIRONMENTS.items():
        path = OUT / f"env{env_id}.json"
        path.write_text(json.dumps(build(env_id, spec), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
