"""Walkthrough: turning preprompts into an instruction dataset.

A real run points CurationJob at a chat-completion endpoint (credentials
come from the environment, never from config files). Here a scripted
stand-in plays the teacher so the demo runs offline, including the two
failure modes the pipeline must absorb: refusals and unparseable replies.

    python3 demos/curate_with_mock_teacher.py
"""

import json
import tempfile
from pathlib import Path

from cartoprompt.client import Reply
from cartoprompt.curate import (
    CurationJob,
    Preprompt,
    parse_datapoint,
    run_curation,
    split_dataset,
)


class ScriptedTeacher:
    model = "demo-teacher"
    temperature = 1.0

    def __init__(self, replies):
        self.replies = list(replies)

    def complete(self, messages):
        return Reply(content=self.replies.pop(0), retries=0)


def main():
    preprompts = [
        Preprompt(id="pp-0", text="This area has 18 cafes and 5 schools."),
        Preprompt(id="pp-1", text="This area is mostly a park."),
    ]

    # First reply: well-formed pairs plus one refusal the filter drops.
    # Second reply: prose the parser cannot use; the job records it and
    # moves on instead of failing.
    replies = [
        json.dumps([
            {"prompt": "How many cafes are there?",
             "answer": "There are 18 cafes."},
            {"prompt": "What is the average rent?",
             "answer": "The preprompt does not provide sufficient information."},
            {"prompt": "Are there schools?", "answer": "Yes, 5 schools."},
        ]),
        "I am sorry, I cannot produce a list for this area.",
    ]

    workdir = Path(tempfile.mkdtemp(prefix="curate-demo-"))
    dataset_path = workdir / "dataset.jsonl"
    report_path = workdir / "report.json"

    job = CurationJob(preprompts=preprompts, pairs_per_request=3,
                      model="demo-teacher")
    report = run_curation(job, dataset_path, report_path,
                          client=ScriptedTeacher(replies))

    print("per-preprompt outcomes:")
    for pp_id, stats in report["preprompts"].items():
        print(f"  {pp_id}: parsed={stats['parsed']} "
              f"filtered_out={stats['filtered_out']} kept={stats['kept']} "
              f"unparsed_responses={stats['unparsed_responses']}")

    print("\ndatapoints (Area/Question/Answer grammar):")
    for line in dataset_path.read_text().splitlines():
        text = json.loads(line)["text"]
        print(f"  {text}")
        area, prompt, answer = parse_datapoint(text)
        assert prompt and answer and area

    # The split is deterministic in the seed; at scale 0.99 leaves one
    # validation line per hundred.
    datapoints = [f"datapoint-{i}" for i in range(200)]
    train, val = split_dataset(datapoints, train_fraction=0.99, seed=7)
    print(f"\nsplit of 200 synthetic datapoints: train={len(train)} val={len(val)}")
    print(f"artifacts in {workdir}")


if __name__ == "__main__":
    main()
