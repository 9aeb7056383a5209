"""
Pipelines, triggers, and lineage
================================

Transforms are registered under a content hash of their spec, run against
the heads of their input branches, and leave a provenance record on every
output commit. Committing to a watched branch queues downstream work
automatically, and lineage walks back to the raw ingestion commit.
"""

import tempfile

from dlflow import PipelineSpec, Workspace

ws = Workspace.init(tempfile.mkdtemp() + "/demo", deterministic=True)
ws.data.create_repo("raw")

clean = PipelineSpec(
    name="clean",
    inputs=(("raw", "master"),),
    transform="clean-validate-text",
    params={"min_chars": 30, "extension": ".txt"},
    trigger="on-commit",
)
split = PipelineSpec(
    name="split",
    inputs=(("clean", "master"),),
    transform="split-dataset",
    params={"train_fraction": 0.8, "seed": 11},
    trigger="on-commit",
)
print("clean spec hash:", ws.pipelines.register(clean)[:12])
print("split spec hash:", ws.pipelines.register(split)[:12])

# Ingest a small corpus: one file is too short, one has the wrong extension.
files = {f"cat/{i}.txt": b"a perfectly reasonable document body " * 2 for i in range(5)}
files["cat/short.txt"] = b"too short"
files["cat/table.csv"] = b"not,a,text,file" * 10
raw_commit = ws.data.commit_files("raw", "master", files, author="ada", message="ingest")

# The commit armed the clean pipeline; draining the queue cascades into split.
print("queued after commit:", ws.pipelines.pending)
for job in ws.pipelines.run_pending():
    print(f"  job {job.id} [{job.pipeline}] -> {job.status}: {job.log.splitlines()[0]}")

split_head = ws.data.head("split", "master")
print("split tree:", sorted(ws.data.read_tree("split", split_head))[:4], "...")

# Re-running on unchanged inputs returns the same output commit.
again = ws.pipelines.run_job("split")
print("replay returns same commit:", again.output_commit == split_head)

# Lineage: split head -> clean commit -> raw commit, with the spec hashes.
lineage = ws.pipelines.get_lineage(split_head)
print("lineage nodes:", [n[:12] for n in lineage["nodes"]])
for edge in lineage["edges"]:
    print(f"  {edge['from'][:12]} --{edge['spec_hash'][:12]}--> {edge['to'][:12]}")
print("reaches raw ingestion:", raw_commit.id in lineage["nodes"])
