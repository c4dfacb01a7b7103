"""Writes the scripted backends under data/scripted/.

Sequence policies match the whole transcript: an anchor (the task query or
persona/goal line) followed by exactly the assistant turns issued so far, so
each reply depends only on how far the episode has progressed.

    python3 scripts/make_scripted_policies.py [--repo .]
"""

import argparse
import json
import re
from pathlib import Path

ASSISTANT = r"<\|assistant\|>\n"
GAP = r"(?:(?!<\|assistant\|>)[\s\S])*"


def fenced(action):
    return "```\n" + action + "\n```"


def sequence_entries(anchor, actions, capture=None):
    """One entry per step. capture maps a step index to a regex (with one
    group) searched in the last environment message; the action may use $1."""
    entries = []
    for k, action in enumerate(actions):
        pattern = anchor
        for prev in actions[:k]:
            pattern += GAP + ASSISTANT + re.escape(fenced(prev)) + r"\n"
        if capture and k in capture:
            pattern += GAP + capture[k]
        pattern += GAP + ASSISTANT + r"\z"
        entries.append({"match": pattern, "response": fenced(action)})
    return entries


def policy(model_id, entries, fallback):
    return {"model_id": model_id, "entries": entries + [{"match": "", "response": fallback}]}


# ---------------------------------------------------------------- web policy

def web_policy():
    deal = r"OBJECTIVE: What is the price of the "
    help_ = r"OBJECTIVE: Look up '"
    flight = r"OBJECTIVE: (?:Find|Book) the cheapest flight to (\w+) on (May \d+)"
    e = [
        {"match": deal + r"(.+?) deal\?[\s\S]*'\1 (\$[0-9.]+)'", "response": fenced("stop [$2]")},
        {"match": deal + r"[\s\S]*\nURL: http://travel-example\.com/deals\n", "response": fenced("scroll [down]")},
        {"match": deal, "response": fenced("click [4]")},
        {"match": help_ + r"(.+?)' on the help page[\s\S]*'\1: (.+?)'\n", "response": fenced("stop [$2]")},
        {"match": help_, "response": fenced("click [6]")},
    ]
    for page, path, link in (("My Trips", "trips", 5), ("Help", "help", 6), ("Deals", "deals", 4)):
        anchor = r"OBJECTIVE: Open the " + re.escape(page) + r" page"
        e.append({"match": anchor + r"[\s\S]*\nURL: http://travel-example\.com/" + path + r"\n", "response": fenced("stop []")})
        e.append({"match": anchor, "response": fenced(f"click [{link}]")})
    e += [
        {"match": r"OBJECTIVE: Find the cheapest flight[\s\S]*\[30\] StaticText '\w+ \d\d:\d\d (\$[0-9.]+)'",
         "response": fenced("stop [$1]")},
        {"match": r"OBJECTIVE: Book the cheapest flight[\s\S]*'Booking confirmed'", "response": fenced("stop []")},
        {"match": r"OBJECTIVE: Book the cheapest flight[\s\S]*\[40\] button 'Book ", "response": fenced("click [40]")},
        # Knowing from the rules that Go opens a date picker, pick the task's date.
        {"match": r"calendar modal[\s\S]*OBJECTIVE: [^\n]* on (May \d+)[\s\S]*\[(\d+)\] button '\1'\n",
         "response": fenced("click [$2]")},
        # Without that knowledge the dialog looks like an interruption and gets closed.
        {"match": r"\[20\] dialog 'Select travel date'[\s\S]*\[(\d+)\] button 'Close'", "response": fenced("click [$1]")},
        {"match": flight + r"[\s\S]*value: '\1'", "response": fenced("click [3]")},
        {"match": flight, "response": fenced("type [2] [$1] [0]")},
    ]
    return policy("scripted-web-policy", e, fenced("stop [N/A]"))


# ---------------------------------------------------------------- fs solver

def rm_twice(name):
    return [f'rm(file_name="{name}")', f'rm(file_name="{name}")']


COUNT = r'"count":(\d+)'
CWD = r'"current_working_directory":"([^"]+)"'

FS_SOLUTIONS = {
    "How many words are in notes.txt?": (['wc(file_name="notes.txt", mode="w")', "stop [$1]"], {1: COUNT}),
    "How many lines does todo.md have?": (['wc(file_name="todo.md", mode="l")', "stop [$1]"], {1: COUNT}),
    "Create a file named report.txt inside the docs folder.":
        (['cd(folder="docs")', 'touch(file_name="report.txt")', "stop []"], None),
    "Make a new directory called archive2024 in the workspace root.": (['mkdir(dir_name="archive2024")', "stop []"], None),
    "Write 'hello world' into a new file greeting.txt in the workspace root.":
        (['echo(content="hello world", file_name="greeting.txt")', "stop []"], None),
    "Delete the file todo.md.": (['rm(file_name="todo.md")', "stop []"], None),
    "Remove the empty directory empty_dir.": (['rm(file_name="empty_dir")', "stop []"], None),
    "Create a folder named drafts.":
        (['mkdir(dir_name="drafts")', "stop []", 'cd(folder="drafts")', 'touch(file_name="idea.md")', "stop []"], None),
    "Go into projects/alpha and tell me the full current directory path.":
        (['cd(folder="projects/alpha")', "pwd()", "stop [$1]"], {2: CWD}),
    "How many characters are in todo.md?": (['wc(file_name="todo.md", mode="c")', "stop [$1]"], {1: COUNT}),
    "Delete the old_logs directory and everything in it.": (rm_twice("old_logs") + ["stop []"], None),
    "Remove the build directory.": (rm_twice("build") + ["stop []"], None),
    "Clean up the workspace by removing the tmp folder.": (rm_twice("tmp") + ["stop []"], None),
    "Delete the beta project inside the projects folder.": (['cd(folder="projects")'] + rm_twice("beta") + ["stop []"], None),
    "Remove old_logs.": (rm_twice("old_logs") + ["stop []", 'touch(file_name="cleanup.log")', "stop []"], None),
    "Remove the docs folder.": (rm_twice("docs") + ["stop []"], None),
    "Inside old_logs, remove the archive directory but keep app.log.":
        (['cd(folder="old_logs")'] + rm_twice("archive") + ["stop []"], None),
    "Remove both the tmp and build directories.": (rm_twice("tmp") + rm_twice("build") + ["stop []"], None),
    "Create a folder named scratch with a file a.txt inside it.":
        (['mkdir(dir_name="scratch")', 'cd(folder="scratch")', 'touch(file_name="a.txt")', "stop []",
          'cd(folder="..")'] + rm_twice("scratch") + ["stop []"], None),
    "Delete the alpha project inside the projects folder.": (['cd(folder="projects")'] + rm_twice("alpha") + ["stop []"], None),
}


def fs_solver():
    entries = []
    for query, (actions, capture) in FS_SOLUTIONS.items():
        entries += sequence_entries(r"USER QUERY:\n" + re.escape(query) + r"\n", actions, capture)
    return policy("scripted-fs-solver", entries, fenced("stop [N/A]"))


# ---------------------------------------------------------------- web exploration

PERSONAS = [
    ("Budget backpacker", "Travels often on a tight budget and books the cheapest fare straight from the home page search.",
     ["type [2] [Lisbon] [1]", "click [21]", "click [40]"]),
    ("Business traveller", "Flies for work on short notice and tries to get to the results as fast as possible.",
     ["click [3]", "click [22]"]),
    ("Deal hunter", "Browses every listed deal before deciding where to go.",
     ["click [4]", "scroll [down]", "scroll [down]", "click [8]"]),
    ("Cautious first-time flyer", "Reads the help page before doing anything else.",
     ["click [6]", "go_back"]),
    ("Trip organiser", "Checks upcoming bookings in My Trips and moves between pages often.",
     ["click [5]", "click [8]"]),
    ("Spontaneous weekender", "Types a destination on a whim, looks at the options and often changes their mind.",
     ["type [2] [Tokyo] [0]", "click [3]", "click [26]"]),
    ("Keyboard user", "Prefers key presses and hovering to clicking.",
     ["press [Enter]", "hover [4]"]),
    ("Curious dreamer", "Searches for unusual destinations to see whether the site serves them.",
     ["type [2] [Atlantis] [1]", "click [21]"]),
    ("Date-flexible planner", "Picks a destination first and then compares travel dates.",
     ["type [2] [Rome] [0]", "click [3]", "click [24]", "click [8]"]),
    ("Direct navigator", "Jumps to pages by typing addresses and relies on the browser history.",
     ["goto [http://travel-example.com/help]", "click [3]", "go_back"]),
]


def web_explorer():
    entries = []
    for name, desc, actions in PERSONAS:
        anchor = r"PERSONA: " + re.escape(f"{name}: {desc}") + r"\n"
        steps = actions + ["stop [done]"]
        for k, action in enumerate(steps):
            prev = "None" if k == 0 else "\n".join(f"{i + 1}. {a}" for i, a in enumerate(steps[:k]))
            pattern = anchor + r"[\s\S]*\nPREVIOUS ACTIONS:\n" + re.escape(prev) + r"\n" + ASSISTANT + r"\z"
            entries.append({"match": pattern, "response": "Something new to try.\n" + fenced(action)})
    return policy("scripted-web-explorer", entries, fenced("stop [done]"))


def web_personas():
    reply = json.dumps([{"persona": n, "description": d} for n, d, _ in PERSONAS], indent=2)
    return policy("scripted-persona-writer", [], reply)


def rule(initial, dynamics):
    return '{"initial_state": "' + initial + '", "environmental_dynamics": "' + dynamics + '"}'


def web_extractor():
    final = r"\nFINAL STATE:\n"
    e = [
        (r"ACTION:\n([^\n]+)" + final + r"[\s\S]*\nError: ([^\n]+)\n" + ASSISTANT,
         rule("A page where the action $1 is not available",
              "The action is rejected with the message '$2' and the page stays as it was.")),
        (r"ACTION:\ntype \[\d+\] \[([^\]]*)\] \[1\][^\n]*" + final + r"[\s\S]*\[20\] dialog 'Select travel date'",
         rule("Home page with an empty destination field",
              "Typing '$1' into dest_field and pressing Enter opens a calendar modal titled 'Select travel date' "
              "with one button per date; no flight results appear until a date is chosen.")),
        (r"ACTION:\ntype \[\d+\] \[([^\]]*)\] \[0\][^\n]*" + final,
         rule("Home page with an empty destination field",
              "Typing '$1' without Enter only fills dest_field; no dialog or results appear.")),
        (r"ACTION:\nclick \[\d+\] where \[\d+\] is Go" + final + r"[\s\S]*\[20\] dialog 'Select travel date'",
         rule("Home page with no dialog open",
              "Clicking Go does not list flights; it opens a calendar modal titled 'Select travel date' and blocks "
              "every other element until a date button or Close is clicked.")),
        (r"ACTION:\nclick \[\d+\] where \[\d+\] is (May \d+)" + final + r"[\s\S]*Please enter a destination",
         rule("Calendar modal open while dest_field is empty",
              "Choosing $1 closes the calendar modal and shows the notice 'Please enter a destination before "
              "choosing a date.' instead of any results.")),
        (r"ACTION:\nclick \[\d+\] where \[\d+\] is (May \d+)" + final + r"[\s\S]*No flights found",
         rule("Calendar modal open for a destination the site does not serve",
              "Choosing $1 loads a results page that says 'No flights found'.")),
        (r"ACTION:\nclick \[\d+\] where \[\d+\] is (May \d+)" + final + r"URL: \S+/results\?dest=(\w+)",
         rule("Calendar modal open with a destination typed",
              "Choosing $1 loads the results page for $2 on $1, listing flights from cheapest to most expensive.")),
        (r"ACTION:\nclick \[\d+\] where \[\d+\] is Close\n",
         rule("Calendar modal open", "Clicking Close dismisses the calendar modal without searching; the typed "
                                     "destination stays in dest_field.")),
        (r"ACTION:\nclick \[\d+\] where \[\d+\] is Book (\w+)\n",
         rule("Flight results page", "Clicking Book $1 books the flight at once, with no payment or confirmation "
                                     "step, and shows a 'Booking confirmed' page.")),
        (r"ACTION:\nscroll \[(\w+)\]",
         rule("Deals page", "Scrolling $1 shows the next page of deals.")),
        (r"INITIAL STATE:\nURL: (\S+)[\s\S]*ACTION:\nclick \[\d+\] where \[\d+\] is (Deals|Help|My Trips|Home)" + final
         + r"URL: (\S+)",
         rule("Page at $1", "Clicking $2 navigates to $3.")),
        (r"ACTION:\ngo_back" + final + r"URL: (\S+)",
         rule("A page reached from another page", "go_back returns to the previously visited page $1.")),
        (r"ACTION:\ngoto \[(\S+)\]",
         rule("Any page", "goto opens $1 directly without going through the home page.")),
    ]
    entries = [{"match": m, "response": r, "escape": "json"} for m, r in e]
    return policy("scripted-web-extractor", entries, rule("A page of the travel site", "no change"))


def echo_filter(model_id):
    # Returns the rule array from the prompt unchanged.
    return policy(model_id, [{"match": r"RULES:\n(\[[\s\S]*\])\n" + ASSISTANT, "response": "$1"}], "[]")


# ---------------------------------------------------------------- fs exploration

GOALS = [
    ("Call ls(), then ls(a=True), and compare which entries appear.", ["ls()", "ls(a=True)"]),
    ("Create a file with touch(), write into it with echo() and read it back with cat().",
     ['touch(file_name="probe.txt")', 'echo(content="first line", file_name="probe.txt")', 'cat(file_name="probe.txt")']),
    ("Count the lines, words and characters of todo.md with wc() in every mode.",
     ['wc(file_name="todo.md", mode="l")', 'wc(file_name="todo.md", mode="w")', 'wc(file_name="todo.md", mode="c")']),
    ("Remove the non-empty old_logs directory with rm() and repeat the call if it does not disappear.",
     ['rm(file_name="old_logs")', 'rm(file_name="old_logs")', "ls()"]),
    ("Remove an empty directory and a plain file with rm().", ['rm(file_name="empty_dir")', 'rm(file_name="todo.md")']),
    ("Move into nested folders with cd(), check pwd(), then climb back with cd(folder='..').",
     ['cd(folder="projects/alpha")', "pwd()", 'cd(folder="..")', 'cd(folder="..")', 'cd(folder="..")']),
    ("Call mkdir() with a name that already exists, with a name containing a slash, and with a new name.",
     ['mkdir(dir_name="docs")', 'mkdir(dir_name="a/b")', 'mkdir(dir_name="reports")']),
    ("Call cat() and wc() on files that do not exist.",
     ['cat(file_name="missing.txt")', 'wc(file_name="missing.txt", mode="w")']),
    ("Call echo() without file_name and with file_name=None to see where the text goes.",
     ['echo(content="hello")', 'echo(content="hello", file_name=None)']),
    ("Start removing the tmp folder with rm(), list the directory, then call rm() on tmp again.",
     ['rm(file_name="tmp")', "ls()", 'rm(file_name="tmp")']),
]


def fs_goals():
    return policy("scripted-goal-writer", [], json.dumps([g for g, _ in GOALS], indent=2))


def fs_explorer(probe_text):
    probe = re.escape(probe_text) + r"\n" + ASSISTANT + r"\z"
    entries = []
    for goal, actions in GOALS:
        anchor = r"EXPLORATION GOAL: " + re.escape(goal) + r"\n"
        full = anchor
        for a in actions:
            full += GAP + ASSISTANT + re.escape(fenced(a)) + r"\n"
        entries.append({"match": full + r"[\s\S]*" + probe, "response": "###STOP"})
    entries.append({"match": probe, "response": "###CONTINUE"})
    for goal, actions in GOALS:
        entries += sequence_entries(r"EXPLORATION GOAL: " + re.escape(goal) + r"\n", actions)
    return policy("scripted-fs-explorer", entries, fenced("stop [done]"))


def fs_extractor():
    act = r"ACTION:\n"
    final = r"\nFINAL STATE:\nCurrent directory: ([^\n]+)\nContents: [^\n]*\nOutput: "
    e = [
        (act + r"(\w+)\([^\n]*" + final + r'\{"error":"([^"]*)"\}',
         rule("Working directory $2", "$1 fails with the error '$3' and the workspace is left unchanged.")),
        (r"Output: [^\n]*removal pending confirmation[^\n]*\n" + act + r'rm\(file_name="([^"]+)"\)' + final
         + r"[^\n]*and its contents removed",
         rule("A removal of '$1' is pending confirmation",
              "Repeating the identical rm call right after the pending notice deletes '$1' together with "
              "everything inside it.")),
        (act + r'rm\(file_name="([^"]+)"\)' + final + r"[^\n]*removal pending confirmation",
         rule("'$1' is a non-empty directory and no removal is pending",
              "rm does not delete a non-empty directory; it only reports that removal is pending confirmation, "
              "and the directory stays until the same call is repeated immediately.")),
        (act + r'rm\(file_name="([^"]+)"\)' + final + r"[^\n]*' removed",
         rule("'$1' is a file or an empty directory", "rm deletes '$1' immediately without asking for confirmation.")),
        (act + r"ls\(a=True\)",
         rule("A directory containing hidden entries",
              "ls with a=True also lists entries whose names start with a dot, which plain ls() leaves out.")),
        (act + r"ls\(\)", rule("Any directory", "ls lists the entries of the current directory.")),
        (act + r'touch\(file_name="([^"]+)"\)' + final + r"None",
         rule("No file named '$1' in the working directory", "touch creates an empty file '$1' and returns None.")),
        (act + r'echo\(content="([^"]*)", file_name="([^"]+)"\)',
         rule("File '$2' exists", "echo with a file_name overwrites '$2' with the text and returns None.")),
        (act + r'echo\(content="([^"]*)"(?:, file_name=None)?\)',
         rule("Any directory", "echo without a file_name returns the text as terminal_output and writes no file.")),
        (act + r'cat\(file_name="([^"]+)"\)',
         rule("File '$1' exists", "cat returns the text of '$1' under file_content.")),
        (act + r'wc\(file_name="([^"]+)", mode="(\w)"\)' + final + r'\{"count":(\d+),"type":"(\w+)"\}',
         rule("File '$1' exists", "wc with mode $2 returns only the number of $5 ($4) without the file name.")),
        (act + r'cd\(folder="\.\."\)' + final,
         rule("Working directory below the root", "cd(folder='..') moves one level up, to $1.")),
        (act + r'cd\(folder="([^"]+)"\)' + final,
         rule("Folder '$1' exists below the working directory",
              "cd accepts the path '$1', including several components, and changes the working directory to $2.")),
        (act + r"pwd\(\)", rule("Any directory", "pwd returns the absolute working directory.")),
        (act + r'mkdir\(dir_name="([^"]+)"\)' + final + r"None",
         rule("No entry named '$1'", "mkdir creates the directory '$1' and returns None.")),
    ]
    entries = [{"match": m, "response": r, "escape": "json"} for m, r in e]
    return policy("scripted-fs-extractor", entries, rule("Workspace", "no change"))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repo", default=".")
    args = ap.parse_args()
    repo = Path(args.repo)
    out = repo / "data/scripted"
    out.mkdir(parents=True, exist_ok=True)
    probe_text = (repo / "prompts/fs_stop_probe.txt").read_text().rstrip("\n")
    files = {
        "web_policy.json": web_policy(),
        "fs_solver.json": fs_solver(),
        "web_personas.json": web_personas(),
        "web_explorer.json": web_explorer(),
        "web_extractor.json": web_extractor(),
        "web_filter.json": echo_filter("scripted-web-filter"),
        "fs_goals.json": fs_goals(),
        "fs_explorer.json": fs_explorer(probe_text),
        "fs_extractor.json": fs_extractor(),
        "fs_filter.json": echo_filter("scripted-fs-filter"),
    }
    for name, body in files.items():
        (out / name).write_text(json.dumps(body, indent=2) + "\n")
        print(f"wrote {out / name} ({len(body['entries'])} entries)")


if __name__ == "__main__":
    main()
