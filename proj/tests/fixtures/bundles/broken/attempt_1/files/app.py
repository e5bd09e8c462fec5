import os
from http.server import BaseHTTPRequestHandler, HTTPServer

def emit(reward)
    print("ACTION_EXPLANATION=never reached", flush=True)
    print("RL_REWARD=%s, NEXT=TERMINAL" % reward, flush=True)
