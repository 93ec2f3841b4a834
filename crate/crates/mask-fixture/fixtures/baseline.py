"""Persistence baseline: carries the last observed adoption rate forward."""
import csv
import os

FIRST_DAY = 30
LAST_DAY = 39


def data_dir():
    return os.path.join(os.environ.get("PROJECT_ROOT", "."), os.environ.get("DATA_PATH", "."))


def daily_rates(path):
    totals = {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            day = int(row["day"])
            worn, seen = totals.get(day, (0, 0))
            totals[day] = (worn + (row["wearing_mask"] == "true"), seen + 1)
    return {d: w / n for d, (w, n) in sorted(totals.items())}


def main():
    rates = daily_rates(os.path.join(data_dir(), "train_data.csv"))
    last = rates[max(rates)]
    with open("results.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["day", "rate"])
        for day in range(FIRST_DAY, LAST_DAY + 1):
            writer.writerow([day, last])
    print(f"predicted days {FIRST_DAY}-{LAST_DAY} from {len(rates)} training days")


main()
