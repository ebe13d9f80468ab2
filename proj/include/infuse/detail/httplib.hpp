#pragma once

// Desk load tests open hundreds of simultaneous connections; the library's
// default accept backlog of 5 drops SYNs under that burst.
#ifndef CPPHTTPLIB_LISTEN_BACKLOG
#define CPPHTTPLIB_LISTEN_BACKLOG 1024
#endif

#include <httplib.h>
