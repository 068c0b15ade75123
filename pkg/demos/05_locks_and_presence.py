"""Lease locks coordinating three workers on one behavior.

Activity locks scope demonstrating/remixing/documenting of a single
behavior. Leases expire on the virtual clock, waiters queue FIFO, and
every transition is broadcast so everyone sees who is doing what.
"""

from crowdmix import SessionServer, SimClock
from crowdmix.server import LocalClient

clock = SimClock()
server = SessionServer(clock=clock, lock_ttl_ms=2000, tick_ms=50)
server.create_session("demo")

watcher = LocalClient("w3")
server.join("demo", "w1")
server.join("demo", "w2")
server.join("demo", "w3", watcher)

server.submit("demo", "w1", {"type": "createBehavior", "name": "bounce"})
acquire = {"type": "lockAcquire", "behaviorId": "bhv-0001",
           "activity": "demonstrate"}

print(server.submit("demo", "w1", acquire)["type"], "-> w1 holds demonstrate")
denied = server.submit("demo", "w2", acquire)
print("%s -> w2 queued at position %d" % (denied["type"],
                                          denied["payload"]["position"]))
denied = server.submit("demo", "w3", acquire)
print("%s -> w3 queued at position %d" % (denied["type"],
                                          denied["payload"]["position"]))

print("\nw1 renews at t=1500 (lease extends to 3500):")
clock.advance(1500)
env = server.submit("demo", "w1", acquire)
print("  renewed=%s leaseExpiry=%d" % (env["payload"]["renewed"],
                                       env["payload"]["leaseExpiry"]))

print("\nw1 goes silent; the lease expires and w2 is promoted FIFO:")
clock.advance(2001)
server.eval_tick("demo")
for env in watcher.inbox[-2:]:
    p = env["payload"]
    print("  seq=%d %s %s" % (env["seq"], env["type"],
                              p.get("holder") or p.get("workerId")))

print("\nw2 releases; w3 (head waiter) is granted immediately:")
server.submit("demo", "w2", {"type": "lockRelease", "behaviorId": "bhv-0001",
                             "activity": "demonstrate"})
for env in watcher.inbox[-2:]:
    print("  seq=%d %s holder=%s" % (env["seq"], env["type"],
                                     env["payload"].get("holder")))

print("\nfinal lock table:",
      server.session("demo").state.view_dict()["locks"])
