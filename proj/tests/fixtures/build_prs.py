#!/usr/bin/env python3
"""Writes fixtures/prs: five pull requests served by the fixture code host,
issue tracker and repository (review --mock-backend, service tests)."""
import json
import os
import subprocess
import tempfile

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "..", "fixtures", "prs")


def gnu_diff(path, before, after):
    with tempfile.TemporaryDirectory() as d:
        a = os.path.join(d, "a")
        b = os.path.join(d, "b")
        with open(a, "w") as f:
            f.write("".join(l + "\n" for l in before))
        with open(b, "w") as f:
            f.write("".join(l + "\n" for l in after))
        label_a = "/dev/null" if not before else f"a/{path}"
        r = subprocess.run(["diff", "-U3", "--label", label_a, "--label", f"b/{path}", a, b],
                           capture_output=True, text=True)
        assert r.returncode == 1, r
        header = f"diff --git a/{path} b/{path}\n"
        if not before:
            header += "new file mode 100644\n"
        return header + r.stdout


def body(n, name):
    return [f"def {name}(x):"] + [f"    v{i} = x + {i}" for i in range(1, n)] + ["    return v1"]


PRS = [
    ("PR-1", "Add order export", "Exports orders to CSV. Fixes SHOP-1.", "feature/SHOP-1",
     [("shop/export.py", body(12, "export"),
       body(5, "export")[:5] + ["    # TODO: stream large exports", "    print(x)"] + body(12, "export")[5:])]),
    ("PR-2", "Harden login", "Moves the login check behind the gateway (SHOP-2, SHOP-3).", "fix/login",
     [("auth/login.py", body(8, "login"),
       body(8, "login")[:3] + ["    password = 'hunter2'", "    try:", "        check(x)", "    except:",
                               "        pass"] + body(8, "login")[3:]),
      ("auth/util.py", [], ["def wait():", "    time.sleep(5)", "    return None"])]),
    ("PR-3", "Rename cart subtotal", "Pure rename, no behaviour change.", "chore/rename",
     [("shop/cart.py", body(6, "cart"), body(6, "cart")[:2] + ["    subtotal = x * 2"] + body(6, "cart")[2:])]),
    ("PR-4", "Parse rules from config", "Rules come from the admin UI. SHOP-4", "feature/SHOP-4",
     [("rules/load.py", body(30, "load"),
       body(30, "load")[:20] + ["    rule = eval(x)", "    if rule == None:", "        return None"] +
       body(30, "load")[20:])]),
    ("PR-5", "Poll the payment status", "Polls until the provider answers. See SHOP-9 (no such issue).",
     "feature/poll",
     [("pay/poll.py", body(10, "poll"),
       body(10, "poll")[:4] + ["    time.sleep(1)"] + body(10, "poll")[4:8] + ["    # FIXME retry cap"] +
       body(10, "poll")[8:])]),
]

ISSUES = [
    {"key": "SHOP-1", "summary": "Order export", "description": "Finance needs a CSV export of orders."},
    {"key": "SHOP-2", "summary": "Login hardening", "description": "Audit found plain-text credentials."},
    {"key": "SHOP-3", "summary": "Login errors", "description": "Errors during login are swallowed."},
    {"key": "SHOP-4", "summary": "Configurable rules", "description": "Admins edit rules without deploys."},
]


def main():
    os.makedirs(ROOT, exist_ok=True)
    for n, (pr_id, title, desc, branch, files) in enumerate(PRS, start=1):
        d = os.path.join(ROOT, pr_id)
        os.makedirs(d, exist_ok=True)
        meta = {"pr_id": pr_id, "repo_id": "demo/shop", "title": title, "description": desc, "branch": branch,
                "source_commit": f"src{n:02d}", "target_commit": f"base{n:02d}",
                "created_at": f"2025-05-0{n}T09:00:00Z", "merged_at": None}
        with open(os.path.join(d, "pull_request.json"), "w") as f:
            json.dump(meta, f, indent=2)
            f.write("\n")
        with open(os.path.join(d, "change.diff"), "w") as f:
            f.write("".join(gnu_diff(p, b, a) for p, b, a in files))
    with open(os.path.join(ROOT, "issues.json"), "w") as f:
        json.dump(ISSUES, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
