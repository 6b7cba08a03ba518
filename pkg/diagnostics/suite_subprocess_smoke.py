import os, sys
ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)
import multiprocessing as mp
import time
from core.scenario import Scenario
from core.suites import suite_worker_main

if __name__ == "__main__":
    mp.set_start_method("spawn", force=True)
    out_q = mp.Queue()
    scenario = Scenario.load(os.path.join(ROOT, "assets", "scenario_default.json"))
    suite = sys.argv[1] if len(sys.argv) > 1 else "car"

    p = mp.Process(target=suite_worker_main, args=(out_q, suite, scenario.to_dict()), daemon=True)
    p.start()
    t0 = time.time()
    try:
        done = False
        while not done and time.time() - t0 < 120:
            while not out_q.empty():
                msg = out_q.get()
                print(msg)
                done = done or msg.get("type") == "done"
            time.sleep(0.2)
    finally:
        p.join(3)
        if p.is_alive():
            p.terminate()
        print("done")
