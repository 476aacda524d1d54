# Test runner for untrusted candidate code.
#
# Scratch directory layout: candidate.py, tests.json, runner.py (this file).
# Output contract: one "@@TEST <PASS|FAIL> <name>" line per case; the bare
# line ALL_TESTS_PASSED and exit code 0 when every case passes.
# Isolation breaches print "@@ISOLATION_VIOLATION <detail>" on stderr and
# exit with status 3.
import json
import os
import sys

SCRATCH = os.path.realpath(os.getcwd())
_WRITE_FLAGS = os.O_WRONLY | os.O_RDWR | os.O_CREAT | os.O_TRUNC | os.O_APPEND
_NETWORK_EVENTS = {
    "socket.connect",
    "socket.bind",
    "socket.getaddrinfo",
    "socket.gethostbyname",
    "socket.gethostbyaddr",
    "socket.sendto",
    "socket.sendmsg",
    "urllib.Request",
}
_PROCESS_EVENTS = {
    "subprocess.Popen",
    "os.system",
    "os.exec",
    "os.posix_spawn",
    "os.spawn",
    "os.fork",
    "os.forkpty",
    "pty.spawn",
    "ctypes.dlopen",
}
_PATH_EVENTS = {
    "os.remove": (0,),
    "os.rmdir": (0,),
    "os.mkdir": (0,),
    "os.rename": (0, 1),
    "os.link": (0, 1),
    "os.symlink": (1,),
    "os.truncate": (0,),
    "os.chmod": (0,),
    "os.chown": (0,),
    "os.utime": (0,),
    "shutil.rmtree": (0,),
    "shutil.copyfile": (1,),
    "shutil.move": (0, 1),
}


def _violation(detail):
    os.write(2, ("@@ISOLATION_VIOLATION %s\n" % detail).encode("utf-8", "replace"))
    os._exit(3)


def _outside(path):
    if isinstance(path, int):
        return False
    try:
        path = os.fsdecode(os.fspath(path))
    except TypeError:
        return False
    full = os.path.realpath(os.path.join(SCRATCH, path))
    return full != SCRATCH and not full.startswith(SCRATCH + os.sep)


def _hook(event, args):
    if event in _NETWORK_EVENTS:
        _violation("network access (%s)" % event)
    if event in _PROCESS_EVENTS:
        _violation("process spawn (%s)" % event)
    if event == "open":
        path, mode, flags = (tuple(args) + (None, None, None))[:3]
        writing = False
        if isinstance(mode, str):
            writing = any(ch in mode for ch in "wax+")
        elif isinstance(flags, int):
            writing = bool(flags & _WRITE_FLAGS)
        if writing and _outside(path):
            _violation("write outside scratch (%s)" % (path,))
    elif event in _PATH_EVENTS:
        for i in _PATH_EVENTS[event]:
            if i < len(args) and _outside(args[i]):
                _violation("%s outside scratch (%s)" % (event, args[i]))


def main():
    with open("tests.json", encoding="utf-8") as f:
        spec = json.load(f)
    with open("candidate.py", encoding="utf-8") as f:
        candidate = f.read()
    sys.addaudithook(_hook)

    namespace = {"__name__": "__candidate__"}
    try:
        exec(compile(candidate, "candidate.py", "exec"), namespace)
        if spec.get("setup"):
            exec(compile(spec["setup"], "tests.json:setup", "exec"), namespace)
    except BaseException as e:  # noqa: BLE001
        print("@@LOAD_ERROR %s: %s" % (type(e).__name__, e), flush=True)
        for case in spec["cases"]:
            print("@@TEST FAIL %s" % case["name"], flush=True)
        os._exit(1)

    failed = 0
    for case in spec["cases"]:
        try:
            exec(compile(case["code"], "tests.json:" + case["name"], "exec"), namespace)
            print("@@TEST PASS %s" % case["name"], flush=True)
        except BaseException as e:  # noqa: BLE001
            failed += 1
            print("@@TEST FAIL %s" % case["name"], flush=True)
            print("@@DETAIL %s: %s" % (type(e).__name__, e), flush=True)
    if failed == 0:
        print("ALL_TESTS_PASSED", flush=True)
        os._exit(0)
    os._exit(1)


main()
