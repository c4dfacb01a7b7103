#!/usr/bin/env python3
"""Writes data/envs/web_travel.json and data/envs/fs.json."""
import json
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent
OUT = ROOT / "data" / "envs"

DATES = ["May 1", "May 2", "May 3", "May 4", "May 5"]

FLIGHTS = {
    "Paris": [("TX101", "08:00", "$312.00"), ("TX205", "13:30", "$279.49"), ("TX309", "19:45", "$355.10")],
    "Rome": [("TX410", "07:15", "$198.20"), ("TX412", "16:40", "$221.75")],
    "Tokyo": [("TX880", "10:05", "$912.30"), ("TX882", "22:50", "$874.99"), ("TX884", "06:20", "$901.00")],
    "Berlin": [("TX150", "09:30", "$145.60"), ("TX152", "18:10", "$139.90")],
    "Lisbon": [("TX330", "11:00", "$167.45")],
    "Oslo": [("TX520", "12:25", "$233.80"), ("TX522", "20:05", "$241.15")],
    "Madrid": [("TX610", "06:45", "$176.30"), ("TX612", "15:20", "$159.99")],
    "Vienna": [("TX720", "14:10", "$188.00"), ("TX722", "08:35", "$205.40")],
}

DEALS = [
    ("Barcelona tapas tour", "$129.00"),
    ("Lisbon weekend", "$149.00"),
    ("Prague castle pass", "$89.50"),
    ("Santorini sunset cruise", "$210.00"),
    ("Alps ski package", "$640.00"),
    ("Dublin pub crawl", "$59.99"),
    ("Reykjavik northern lights", "$320.00"),
    ("Amsterdam canal cruise", "$45.00"),
    ("Vienna opera night", "$175.25"),
    ("Venice gondola", "$95.00"),
]

HELP = [
    "Checked bags included: 1",
    "Carry-on weight limit: 8 kg",
    "Cancellation window: 24 hours",
    "Support phone: +1-555-0134",
    "Seat selection fee: $15",
]

TRIPS = ["TX099 to London on Apr 20"]


def cheapest(dest):
    return min(FLIGHTS[dest], key=lambda f: float(f[2][1:]))


def web():
    tasks = []
    plain = [
        ("web-01", "What is the price of the Lisbon weekend deal?", [{"answer": "$149.00"}]),
        ("web-02", "What is the price of the Barcelona tapas tour deal?", [{"answer": "$129.00"}]),
        ("web-03", "What is the price of the Reykjavik northern lights deal?", [{"answer": "$320.00"}]),
        ("web-04", "What is the price of the Venice gondola deal?", [{"answer": "$95.00"}]),
        ("web-05", "Look up 'Checked bags included' on the help page and report the value.", [{"answer": "1"}]),
        ("web-06", "Look up 'Cancellation window' on the help page and report the value.", [{"answer": "24 hours"}]),
        ("web-07", "Look up 'Support phone' on the help page and report the value.", [{"answer": "+1-555-0134"}]),
        ("web-08", "Open the My Trips page and stop there.", [{"page": "/trips"}]),
        ("web-09", "Open the Help page and stop there.", [{"page": "/help"}]),
        ("web-10", "Open the Deals page and stop there.", [{"page": "/deals"}]),
    ]
    for tid, text, success in plain:
        tasks.append({"id": tid, "category": "plain", "instruction": text, "max_steps": 30, "success": success})
    lookups = [("Paris", "May 2"), ("Rome", "May 1"), ("Tokyo", "May 3"), ("Berlin", "May 5"),
               ("Oslo", "May 4"), ("Madrid", "May 2")]
    n = 11
    for dest, date in lookups:
        tasks.append({"id": f"web-{n:02d}", "category": "surprise",
                      "instruction": f"Find the cheapest flight to {dest} on {date} and report its price.",
                      "max_steps": 30, "success": [{"answer": cheapest(dest)[2]}]})
        n += 1
    bookings = [("Rome", "May 4"), ("Lisbon", "May 1"), ("Vienna", "May 3"), ("Paris", "May 5")]
    for dest, date in bookings:
        code = cheapest(dest)[0]
        tasks.append({"id": f"web-{n:02d}", "category": "surprise",
                      "instruction": f"Book the cheapest flight to {dest} on {date}.",
                      "max_steps": 30,
                      "success": [{"booked": {"flight": code, "dest": dest, "date": date}},
                                  {"page": f"/booking/{code}"}]})
        n += 1
    return {
        "format_version": 1,
        "env": "web",
        "kind": "web",
        "site": "travel-example.com",
        "description": (
            "travel-example.com is a flight booking website. The home page has a destination text field "
            "(dest_field) and a Go button for searching flights, plus links to a Deals page with discounted "
            "travel packages, a Help page with booking policies and a My Trips page listing upcoming trips. "
            "Search results list flights by price with a Book button for each flight."
        ),
        "dates": DATES,
        "flights": {d: [{"code": c, "time": t, "price": p} for c, t, p in fl] for d, fl in FLIGHTS.items()},
        "deals": [{"title": t, "price": p} for t, p in DEALS],
        "help": HELP,
        "trips": TRIPS,
        "tasks": tasks,
    }


PREFIX = "Workspace file system tool for navigating directories and managing files. Tool description: "

TOOLS = [
    ("ls", "List the contents of the current directory.",
     {"a": {"type": "boolean", "description": "Show hidden files and directories. Defaults to False.", "default": False}},
     [], {"current_directory_content": {"type": "array", "description": "Names in the current directory.", "items": {"type": "string"}}}),
    ("pwd", "Return the current working directory path.", {}, [],
     {"current_working_directory": {"type": "string", "description": "Absolute path of the current directory."}}),
    ("cd", "Change the current directory. Use '..' for the parent directory.",
     {"folder": {"type": "string", "description": "Directory to change into, relative to the current directory."}},
     ["folder"], {"current_working_directory": {"type": "string", "description": "The new current directory path."}}),
    ("mkdir", "Create a new directory in the current directory.",
     {"dir_name": {"type": "string", "description": "Name of the new directory. Paths are not allowed."}},
     ["dir_name"], {}),
    ("touch", "Create a new file of any extension in the current directory.",
     {"file_name": {"type": "string", "description": "The name of the new file in the current directory. Paths are not allowed."}},
     ["file_name"], {}),
    ("echo", "Write content to a file in the current directory, or display it when no file is given.",
     {"content": {"type": "string", "description": "Text to write or display."},
      "file_name": {"type": "string", "description": "File to overwrite with the content. Defaults to None.", "default": None}},
     ["content"], {"terminal_output": {"type": "string", "description": "Displayed content when no file is given."}}),
    ("cat", "Display the contents of a file in the current directory.",
     {"file_name": {"type": "string", "description": "File to display."}},
     ["file_name"], {"file_content": {"type": "string", "description": "The file contents."}}),
    ("wc", "Count the number of lines, words, or characters in a file from the current directory.",
     {"file_name": {"type": "string", "description": "File to count."},
      "mode": {"type": "string", "description": "'l' for lines, 'w' for words, 'c' for characters.", "default": "l"}},
     ["file_name"], {"count": {"type": "integer", "description": "The count."},
                     "type": {"type": "string", "description": "Unit counted: lines, words or characters."}}),
    ("rm", "Remove a file or directory from the current directory.",
     {"file_name": {"type": "string", "description": "The name of the file or directory to remove."}},
     ["file_name"], {"result": {"type": "string", "description": "The result of the remove operation."}}),
]

NOTES = "The quarterly review meeting moved to Thursday afternoon so please update the shared calendar and agenda now.\n"
TODO = "- buy milk\n- file taxes\n- call Sam\n"

TREE = {
    ".hidden_config": "theme=dark\n",
    "build": {"obj": {"main.o": "binary\n"}, "output.bin": "binary\n"},
    "docs": {"guide.md": "Getting started guide\n"},
    "empty_dir": {},
    "notes.txt": NOTES,
    "old_logs": {"app.log": "started\nstopped\n", "archive": {"2023.log": "old entries\n"}},
    "projects": {"alpha": {"main.py": "print('alpha')\n"}, "beta": {"README.md": "beta project\n"}},
    "tmp": {"scratch.txt": "temporary\n"},
    "todo.md": TODO,
}


def fs():
    plain = [
        ("fs-01", ["How many words are in notes.txt?"], [{"answer": str(len(NOTES.split()))}]),
        ("fs-02", ["How many lines does todo.md have?"], [{"answer": "3"}]),
        ("fs-03", ["Create a file named report.txt inside the docs folder."], [{"is_file": "docs/report.txt"}]),
        ("fs-04", ["Make a new directory called archive2024 in the workspace root."], [{"is_dir": "archive2024"}]),
        ("fs-05", ["Write 'hello world' into a new file greeting.txt in the workspace root."],
         [{"content": {"path": "greeting.txt", "equals": "hello world"}}]),
        ("fs-06", ["Delete the file todo.md."], [{"absent": "todo.md"}, {"is_file": "notes.txt"}]),
        ("fs-07", ["Remove the empty directory empty_dir."], [{"absent": "empty_dir"}]),
        ("fs-08", ["Create a folder named drafts.", "Now create a file called idea.md inside drafts."],
         [{"is_dir": "drafts"}, {"is_file": "drafts/idea.md"}]),
        ("fs-09", ["Go into projects/alpha and tell me the full current directory path."],
         [{"answer": "/workspace/projects/alpha"}, {"cwd": "/workspace/projects/alpha"}]),
        ("fs-10", ["How many characters are in todo.md?"], [{"answer": str(len(TODO))}]),
    ]
    surprise = [
        ("fs-11", ["Delete the old_logs directory and everything in it."], [{"absent": "old_logs"}]),
        ("fs-12", ["Remove the build directory."], [{"absent": "build"}, {"is_dir": "docs"}]),
        ("fs-13", ["Clean up the workspace by removing the tmp folder."], [{"absent": "tmp"}]),
        ("fs-14", ["Delete the beta project inside the projects folder."],
         [{"absent": "projects/beta"}, {"is_dir": "projects/alpha"}]),
        ("fs-15", ["Remove old_logs.", "Now create a file named cleanup.log in the workspace root."],
         [{"absent": "old_logs"}, {"is_file": "cleanup.log"}]),
        ("fs-16", ["Remove the docs folder."], [{"absent": "docs"}]),
        ("fs-17", ["Inside old_logs, remove the archive directory but keep app.log."],
         [{"absent": "old_logs/archive"}, {"is_file": "old_logs/app.log"}]),
        ("fs-18", ["Remove both the tmp and build directories."], [{"absent": "tmp"}, {"absent": "build"}]),
        ("fs-19", ["Create a folder named scratch with a file a.txt inside it.", "Now delete the scratch folder entirely."],
         [{"absent": "scratch"}]),
        ("fs-20", ["Delete the alpha project inside the projects folder."],
         [{"absent": "projects/alpha"}, {"is_dir": "projects/beta"}]),
    ]
    tasks = []
    for cat, group in (("plain", plain), ("surprise", surprise)):
        for tid, turns, success in group:
            tasks.append({"id": tid, "category": cat, "turns": turns, "max_steps": 30, "success": success})
    tools = [{"name": n, "description": PREFIX + d,
              "parameters": {"type": "dict", "properties": p, "required": r},
              "response": {"type": "dict", "properties": resp}} for n, d, p, r, resp in TOOLS]
    return {
        "format_version": 1,
        "env": "fs",
        "kind": "function_calling",
        "description": "A simulated workspace file system rooted at /workspace, driven through function calls.",
        "tools": tools,
        "fixtures": {"default": TREE},
        "tasks": tasks,
    }


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "web_travel.json").write_text(json.dumps(web(), indent=2) + "\n")
    (OUT / "fs.json").write_text(json.dumps(fs(), indent=2) + "\n")
