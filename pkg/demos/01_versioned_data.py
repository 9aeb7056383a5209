"""
Versioned data store
====================

Content-addressed blobs, repos, branches, and immutable commits: the
storage layer everything else builds on.
"""

import tempfile

from dlflow import Workspace

ws = Workspace.init(tempfile.mkdtemp() + "/demo", deterministic=True)

# A repo starts with an empty master branch.
ws.data.create_repo("articles")
print("repos:", ws.data.list_repos())

# Commits snapshot a whole file tree; identical bytes are stored once.
first = ws.data.commit_files(
    "articles", "master",
    {"sport/001.txt": b"match report", "tech/001.txt": b"gadget review"},
    author="ada", message="initial ingestion",
)
print("first commit:", first.id[:12], "parent:", first.parent)

second = ws.data.commit_files(
    "articles", "master",
    {"sport/001.txt": b"match report", "tech/001.txt": b"updated review"},
    author="ada", message="tech rewrite",
)
print("second commit:", second.id[:12], "parent:", second.parent[:12])

# Old commits stay readable forever: history is immutable.
print("old bytes:", ws.data.read_file("articles", first.id, "tech/001.txt"))
print("new bytes:", ws.data.read_file("articles", "master", "tech/001.txt"))

# Path-level diff between any two commits.
print("diff:", sorted(ws.data.diff("articles", first.id, second.id)))

# Branches fork without affecting each other.
ws.data.commit_files(
    "articles", "experiments", {"sport/001.txt": b"draft"}, author="ada", message="fork"
)
print("branches:", {b: (h or "")[:12] for b, h in ws.data.branches("articles").items()})

# Deduplication: the unchanged sport article is one object under the hood.
tree1 = ws.data.read_tree("articles", first.id)
tree2 = ws.data.read_tree("articles", second.id)
print("sport blob shared:", tree1["sport/001.txt"] == tree2["sport/001.txt"])
