# -*- coding: utf-8 -*-
# pragma pylint: disable=unused-argument, no-self-use
"""Function implementation"""

import logging
from resilient_circuits import ResilientComponent, function, handler, StatusMessage, FunctionResult, FunctionError
from fn_cisco_amp4ep.lib.amp_client import Ampclient
from fn_cisco_amp4ep.lib.helpers import validate_opts, validate_params, process_params
from fn_cisco_amp4ep.lib.amp_ratelimit import AmpRateLimit

RATE_LIMITER = AmpRateLimit()


class FunctionComponent(ResilientComponent):
    """Component that implements Resilient function 'fn_amp_move_computer' of
    package fn_cisco_amp4ep.

    The Function takes the following parameters:
        amp_conn_guid, amp_group_guid
    An example of a set of query parameter might look like the following:

            amp_conn_guid = "00000000-0000-0000-0000-000000000000"
            amp_group_guid = "00000000-0000-0000-0000-000000000000"

    The function will execute a REST api move request against a Cisco AMP for endpoints server and returns a result
    in JSON format similar to the following.

        {
            "input_params": {"conn_guid": "00000000-0000-0000-0000-000000000000",
                             "group_guid": "00000000-0000-0000-0000-000000000000"
                            },
            "response": {
                         "version": "v1.2.0",
                         "metadata": {
                            "links": {
                                "self": "https://api.amp.cisco.com/v1/computers/00000000"
                            }
                         },
                         "data": {
                                   "connector_guid": "00000000-0000-0000-0000-000000000000",
                                   "hostname": "Demo_AMP_Threat_Audit",
                                   "active": True,
                                   "group_guid": "00000000-0000-0000-0000-000000000000"
                         }
            },
            "query_execution_time": "2019-02-20 14:21:13"
        }
    """
    def __init__(self, opts):
        """constructor provides access to the configuration options"""
        super(FunctionComponent, self).__init__(opts)
        self.options = opts.get("fn_cisco_amp4ep", {})
        validate_opts(self)

    def status_summary(self) -> str:
        """Summarise the configured options for logging."""
        return "fn_cisco_amp4ep with {} option(s)".format(len(self.options))

    def _log_params(self, params) -> None:
        """Write the processed parameters to the debug log."""
        log = logging.getLogger(__name__)
        for key, value in params.items():
            log.debug("%s: %s", key, value)

    def _rate_limited_call(self, fn, *args) -> dict:
        """Run an AMP client call under the shared rate limiter."""
        return RATE_LIMITER.call(fn, *args)

    def _result_payload(self, params, rtn) -> dict:
        """Wrap a raw AMP response with the parameters that produced it."""
        return {
            "input_params": params,
            "response": rtn,
        }

    def _group_name(self, rtn) -> str:
        """Extract the group guid from a move response."""
        data = rtn.get("data", {})
        return data.get("group_guid", "")

    def _timestamp(self) -> str:
        """Current time in the format used by query_execution_time."""
        return ""

    @handler("reload")
    def _reload(self, event, opts):
        """Configuration options have changed, save new values"""
        self.options = opts.get("fn_cisco_amp4ep", {})
        validate_opts(self)

    @function("fn_amp_move_computer")
    def _fn_amp_move_computer_function(self, event, *args, **kwargs):
        """Function: Move computer to a group with given connector guid and group guid."""
        try:
            log = logging.getLogger(__name__)
            amp_conn_guid = kwargs.get("amp_conn_guid")
            amp_group_guid = kwargs.get("amp_group_guid")
            params = {"conn_guid": amp_conn_guid, "group_guid": amp_group_guid}
            validate_params(params)
            process_params(params)
            self._log_params(params)
            yield StatusMessage("Running Cisco AMP for endpoints move computer.")
            amp = Ampclient(self.options, RATE_LIMITER)
            rtn = self._rate_limited_call(amp.set_group_for_computer, params["conn_guid"], params["group_guid"])
            results = self._result_payload(params, rtn)
            log.debug("Moved computer to group %s", self._group_name(rtn))
            yield StatusMessage("Returning 'move computer' results.")
            yield FunctionResult(results)
        except Exception:
            yield FunctionError()
