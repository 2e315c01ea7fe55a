"""Integer codes shared by both kernel implementations."""

TCP = 0
UDP = 1

ACCEPT = 0
CONNECT = 1
RECONNECT = 2
DISCONNECT = 3
SEND = 4
RECEIVE = 5
RETRANSMIT = 6
COPY = 7

# column layout of window_sums output
S_TCP_BYTES_SENT = 0
S_TCP_BYTES_RECV = 1
S_TCP_PKTS_SENT = 2
S_TCP_PKTS_RECV = 3
S_TCP_BYTES_COPIED = 4
S_TCP_PKTS_COPIED = 5
S_UDP_BYTES_SENT = 6
S_UDP_BYTES_RECV = 7
S_UDP_PKTS_SENT = 8
S_UDP_PKTS_RECV = 9
S_TOTAL_EVENTS = 10
S_N_ACCEPT = 11
S_N_CONNECT = 12
S_N_RECONNECT = 13
S_N_DISCONNECT = 14
S_N_RECEIVE = 15
S_N_RETRANSMIT = 16
S_TCP_EVENTS = 17
S_UDP_EVENTS = 18
N_SUMS = 19
