#pragma once

#include "infuse/protocol/clock.hpp"
#include "infuse/protocol/codec.hpp"
#include "infuse/protocol/decimal.hpp"
#include "infuse/protocol/error.hpp"
#include "infuse/protocol/http.hpp"
#include "infuse/protocol/mac_address.hpp"
#include "infuse/protocol/messages.hpp"
#include "infuse/protocol/token.hpp"

#include "infuse/server/config.hpp"
#include "infuse/server/http_server.hpp"
#include "infuse/server/infusion_log.hpp"
#include "infuse/server/password.hpp"
#include "infuse/server/records.hpp"
#include "infuse/server/router.hpp"
#include "infuse/server/service.hpp"
#include "infuse/server/token_store.hpp"

#include "infuse/pump/config.hpp"
#include "infuse/pump/device_api.hpp"
#include "infuse/pump/motion.hpp"
#include "infuse/pump/pump.hpp"
#include "infuse/pump/scale.hpp"
#include "infuse/pump/simulation.hpp"

#include "infuse/eval/accuracy.hpp"
#include "infuse/eval/export.hpp"
#include "infuse/eval/load_test.hpp"
#include "infuse/eval/metrics.hpp"
