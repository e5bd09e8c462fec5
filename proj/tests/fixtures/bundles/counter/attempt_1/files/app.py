"""Emits numbered protocol lines on request, for event accounting tests."""
import os
import sys
from http.server import BaseHTTPRequestHandler, HTTPServer
from urllib.parse import parse_qs, urlsplit

state = {"seq": 0}


class Handler(BaseHTTPRequestHandler):
    def log_message(self, format, *args):
        pass

    def reply(self, status, body):
        data = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "text/plain")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self):
        url = urlsplit(self.path)
        if url.path == "/":
            self.reply(200, "ok")
            return
        if url.path == "/emit":
            n = int(parse_qs(url.query).get("n", ["1"])[0])
            noise = parse_qs(url.query).get("noise", ["0"])[0] == "1"
            first = state["seq"] + 1
            for _ in range(n):
                state["seq"] += 1
                if noise:
                    print("log: handling request %d" % state["seq"], flush=True)
                print("ACTION_EXPLANATION=event %d" % state["seq"], flush=True)
                print("RL_REWARD=0.0, NEXT=seq-%d" % state["seq"], flush=True)
            self.reply(200, "%d %d" % (first, state["seq"]))
            return
        if url.path == "/exit":
            self.reply(200, "bye")
            print("ACTION_EXPLANATION=shutting down", flush=True)
            print("RL_REWARD=0.0, NEXT=seq-final", flush=True)
            sys.stdout.flush()
            os._exit(0)
        self.reply(404, "not found")


if __name__ == "__main__":
    HTTPServer(("0.0.0.0", int(os.environ.get("PORT", "8000"))), Handler).serve_forever()
