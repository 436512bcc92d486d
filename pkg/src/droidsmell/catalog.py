"""The security smell ruleset.

``core`` holds the ten smells checked by the original lightweight tool;
``extended`` adds five more smells that have a purely static symptom.
"""
from __future__ import annotations

import re

from .errors import UnknownRuleset
from .manifest import effective_exported
from .rules import (
    Rule,
    ScanContext,
    all_of,
    any_of,
    calls,
    field_access,
    literals,
    manifest_hit,
    method_bodies,
    native_libraries,
    new_instance,
)
from .smali import argument_registers, resolve_constant, trivial_body

STANDARD_SCHEMES = frozenset({
    "http", "https", "file", "content", "mailto", "tel", "geo", "sms",
    "smsto", "mms", "mmsto", "about", "javascript",
})
SENSITIVE_HEADER = re.compile(r"authorization|cookie|token|password|secret|api[-_]?key", re.IGNORECASE)

WEBVIEW = "Landroid/webkit/WebView;"
WEBVIEW_CLIENT = "Landroid/webkit/WebViewClient;"
X509_TRUST_MANAGER = "Ljavax/net/ssl/X509TrustManager;"
HOSTNAME_VERIFIER = "Ljavax/net/ssl/HostnameVerifier;"
CHECK_SERVER_TRUSTED = "([Ljava/security/cert/X509Certificate;Ljava/lang/String;)V"
VERIFY = "(Ljava/lang/String;Ljavax/net/ssl/SSLSession;)Z"
WORLD_ACCESS_MODES = 0x1 | 0x2  # MODE_WORLD_READABLE | MODE_WORLD_WRITEABLE


def _catalog_ref(category: str, smell: str) -> str:
    return f"security smell catalog / {category} / {smell}"


# ----------------------------------------------------------- manifest side

def _debuggable(ctx: ScanContext):
    if ctx.manifest.debuggable is True:
        yield manifest_hit(ctx.manifest.application_line, "/manifest/application",
                           'android:debuggable="true"')


def _custom_schemes(ctx: ScanContext):
    for comp in ctx.manifest.components:
        for flt in comp.intent_filters:
            for scheme, line in flt.scheme_lines:
                # unresolved resource references never match
                if scheme.startswith("@") or scheme in STANDARD_SCHEMES:
                    continue
                yield manifest_hit(
                    line, f"{comp.element_path}/intent-filter/data[@scheme='{scheme}']",
                    f'android:scheme="{scheme}"',
                )


def _unprotected(comp) -> bool:
    if comp.permission_attr:
        return False
    if comp.kind == "provider" and comp.read_permission and comp.write_permission:
        return False
    return True


def _exported_components(kinds):
    def match(ctx: ScanContext):
        for comp in ctx.manifest.components:
            if comp.kind not in kinds:
                continue
            if effective_exported(comp, ctx.manifest.target_sdk) and _unprotected(comp):
                how = "exported" if comp.exported_attr else "intent-filter"
                yield manifest_hit(comp.line, comp.element_path,
                                   f"<{comp.kind} android:name=\"{comp.name}\"> ({how}, no permission)")

    return match


def _install_packages(ctx: ScanContext):
    perm = "android.permission.INSTALL_PACKAGES"
    if perm in ctx.manifest.uses_permissions:
        yield manifest_hit(ctx.manifest.permission_line(perm),
                           f"/manifest/uses-permission[@name='{perm}']",
                           f'<uses-permission android:name="{perm}"/>')


# --------------------------------------------------------------- code side

def _arg_constant(method, idx, instr, position=0, ptype=None):
    args = argument_registers(instr)
    if ptype is not None:
        args = [a for a in args if a[0] == ptype]
    if len(args) <= position:
        return None
    return resolve_constant(method, idx, args[position][1])


def _js_enabled(method, idx, instr) -> bool:
    return _arg_constant(method, idx, instr, ptype="Z") == 1


def _header_severity(method, idx, instr):
    for other in method.instructions:
        if other.string_literal is not None and SENSITIVE_HEADER.search(other.string_literal):
            return "critical"
    return None


def _weak_digest(method, idx, instr) -> bool:
    value = _arg_constant(method, idx, instr)
    return isinstance(value, str) and re.fullmatch(r"MD5|SHA-?1", value.strip(), re.IGNORECASE) is not None


def _weak_cipher(method, idx, instr) -> bool:
    value = _arg_constant(method, idx, instr)
    if not isinstance(value, str):
        return False
    transformation = value.strip().upper()
    algorithm = transformation.split("/", 1)[0]
    return "/ECB/" in transformation or "/" not in transformation or algorithm in ("DES", "RC4")


def _world_mode(method, idx, instr) -> bool:
    mode = _arg_constant(method, idx, instr, ptype="I")
    return isinstance(mode, int) and bool(mode & WORLD_ACCESS_MODES)


def _trivial_override(interface, name, descriptor):
    def test(cls, method, index):
        return (
            interface in cls.interfaces
            and method.name == name
            and method.descriptor == descriptor
            and trivial_body(method)
        )

    return test


def _ssl_error_ignored(cls, method, index) -> bool:
    if cls.super_name != WEBVIEW_CLIENT or method.name != "onReceivedSslError":
        return False
    proceeds = any(
        i.method_ref is not None
        and i.method_ref.class_name == "Landroid/webkit/SslErrorHandler;"
        and i.method_ref.method_name == "proceed"
        for i in method.instructions
    )
    branches = any(i.mnemonic.startswith("if-") for i in method.instructions)
    return proceeds and not branches


def _cleartext_url(value: str) -> bool:
    lowered = value.lower()
    return lowered.startswith("http://") or lowered.startswith("ftp://")


# ------------------------------------------------------------------ rules

_IAP = "Insufficient Attack Protection"
_SI = "Security Invalidation"
_BAC = "Broken Access Control"
_SDE = "Sensitive Data Exposure"
_LIV = "Lax Input Validation"

CORE_RULES = (
    Rule(
        id="XSS_LIKE_INJECTION",
        smell_name="XSS-like Code Injection",
        category=_LIV,
        severity="warning",
        scope="code",
        predicate=all_of(
            calls({"Landroid/webkit/WebSettings;": {"setJavaScriptEnabled"}}, test=_js_enabled),
            calls({WEBVIEW: {"loadUrl", "loadData", "loadDataWithBaseURL"}}, subclasses_of=[WEBVIEW]),
        ),
        citation=_catalog_ref(_LIV, "XSS-like Code Injection"),
        description="JavaScript is switched on for a WebView (setJavaScriptEnabled(true)) "
                    "and the app loads content into a WebView.",
        risk="Script smuggled into loaded pages runs with the privileges of the app's WebView.",
        mitigation="Keep JavaScript off unless required, show untrusted content in the system "
                   "browser, and sanitize any HTML before loading it.",
    ),
    Rule(
        id="BROKEN_WEBVIEW_SANDBOX",
        smell_name="Broken WebView's Sandbox",
        category=_LIV,
        severity="warning",
        scope="code",
        predicate=calls({WEBVIEW: {"addJavascriptInterface"}}, subclasses_of=[WEBVIEW]),
        citation=_catalog_ref(_LIV, "Broken WebView's Sandbox"),
        description="A Java object is bridged into WebView JavaScript via addJavascriptInterface.",
        risk="Injected script can call into the bridged Java object and reach device resources.",
        mitigation="Expose only methods annotated with @JavascriptInterface and never bridge "
                   "objects into WebViews that render untrusted content.",
    ),
    Rule(
        id="DYNAMIC_CODE_LOADING",
        smell_name="Dynamic Code Loading",
        category=_LIV,
        severity="warning",
        scope="code",
        predicate=any_of(
            calls({
                "Ldalvik/system/DexClassLoader;": None,
                "Ldalvik/system/InMemoryDexClassLoader;": None,
                "Ljava/net/URLClassLoader;": None,
            }),
            new_instance("Ldalvik/system/PathClassLoader;"),
            calls({"*": {"createPackageContext"}},
                  descriptor="(Ljava/lang/String;I)Landroid/content/Context;"),
        ),
        citation=_catalog_ref(_LIV, "Dynamic Code Loading"),
        description="Code is loaded at run time through a class loader, or another app's "
                    "context is obtained with createPackageContext.",
        risk="Whoever can replace the loaded code gains code execution inside the app.",
        mitigation="Ship code inside the package, or verify integrity and origin of anything "
                   "loaded at run time.",
    ),
    Rule(
        id="CUSTOM_SCHEME_CHANNEL",
        smell_name="Custom Scheme Channel",
        category=_BAC,
        severity="warning",
        scope="mixed",
        predicate=any_of(
            _custom_schemes,
            calls({"Lorg/apache/http/conn/scheme/SchemeRegistry;": {"register"}}),
        ),
        citation=_catalog_ref(_BAC, "Custom Scheme Channel"),
        description="An intent filter registers a non-standard URI scheme, or code registers "
                    "one with SchemeRegistry.register.",
        risk="Any installed app may claim the same scheme and receive the messages, tokens included.",
        mitigation="Prefer explicit intents or verified App Links over custom schemes.",
    ),
    Rule(
        id="UNIQUE_HARDWARE_ID",
        smell_name="Unique Hardware Identifier",
        category=_SDE,
        severity="warning",
        scope="code",
        predicate=any_of(
            calls({
                "Landroid/telephony/TelephonyManager;": {
                    "getDeviceId", "getSubscriberId", "getSimSerialNumber", "getLine1Number"},
                "Landroid/bluetooth/BluetoothAdapter;": {"getAddress"},
                "Landroid/net/wifi/WifiInfo;": {"getMacAddress"},
            }),
            literals(lambda v: v == "android_id"),
        ),
        citation=_catalog_ref(_SDE, "Unique Hardware Identifier"),
        description="Device-bound identifiers (IMEI, IMSI, SIM serial, phone number, MAC "
                    "addresses, ANDROID_ID) are read.",
        risk="Stable hardware IDs let anyone holding them correlate the user across apps and services.",
        mitigation="Use a per-install identifier such as UUID.randomUUID() stored in app storage.",
    ),
    Rule(
        id="INSECURE_NETWORK_PROTOCOL",
        smell_name="Insecure Network Protocol",
        category=_SDE,
        severity="warning",
        scope="code",
        predicate=literals(_cleartext_url),
        citation=_catalog_ref(_SDE, "Insecure Network Protocol"),
        description="A string constant holds an http:// or ftp:// URL.",
        risk="Cleartext traffic can be read and altered by anyone on the network path.",
        mitigation="Use TLS for all endpoints and forbid cleartext traffic in the network "
                   "security configuration.",
    ),
    Rule(
        id="HEADER_ATTACHMENT",
        smell_name="Header Attachment",
        category=_SDE,
        severity="warning",
        scope="code",
        predicate=calls(
            {
                "Lorg/apache/http/*": {"addHeader", "setHeader"},
                "Ljava/net/HttpURLConnection;": {"setRequestProperty"},
                "Ljava/net/URLConnection;": {"setRequestProperty"},
                "Ljavax/net/ssl/HttpsURLConnection;": {"setRequestProperty"},
            },
            severity=_header_severity,
        ),
        citation=_catalog_ref(_SDE, "Header Attachment"),
        description="Values are attached to HTTP request headers; escalated to critical when "
                    "the same method mentions credential-like header names.",
        risk="Credentials carried in headers leak to any eavesdropper on unencrypted links and "
             "to intermediaries that log headers.",
        mitigation="Authenticate with a token protocol such as OAuth 2 instead of static "
                   "secrets in headers.",
    ),
    Rule(
        id="EXPOSED_CLIPBOARD",
        smell_name="Exposed Clipboard",
        category=_SDE,
        severity="info",
        scope="code",
        predicate=calls({
            "Landroid/content/ClipboardManager;": None,
            "Landroid/text/ClipboardManager;": None,
        }),
        citation=_catalog_ref(_SDE, "Exposed Clipboard"),
        description="The app reads or writes the system clipboard.",
        risk="Every app can read and overwrite clipboard content.",
        mitigation="Keep sensitive data off the clipboard and validate anything pasted in.",
    ),
    Rule(
        id="DEBUGGABLE_RELEASE",
        smell_name="Debuggable Release",
        category=_BAC,
        severity="critical",
        scope="manifest",
        predicate=_debuggable,
        citation=_catalog_ref(_BAC, "Debuggable Release"),
        description='The manifest sets android:debuggable="true" on <application>.',
        risk="A local attacker posing as the debugger can attach and run code inside the app process.",
        mitigation="Drop the attribute or set it to false in release builds.",
    ),
    Rule(
        id="IMPROPER_CERT_VALIDATION",
        smell_name="Improper Certificate Validation",
        category=_SI,
        severity="critical",
        scope="code",
        predicate=any_of(
            method_bodies(_trivial_override(X509_TRUST_MANAGER, "checkServerTrusted", CHECK_SERVER_TRUSTED)),
            method_bodies(_trivial_override(HOSTNAME_VERIFIER, "verify", VERIFY)),
            method_bodies(_ssl_error_ignored),
            field_access("ALLOW_ALL_HOSTNAME_VERIFIER"),
        ),
        citation=_catalog_ref(_SI, "Improper Certificate Validation"),
        description="A TrustManager or HostnameVerifier accepts everything, a WebViewClient "
                    "proceeds on every SSL error, or ALLOW_ALL_HOSTNAME_VERIFIER is used.",
        risk="TLS connections accept forged certificates, enabling man-in-the-middle interception.",
        mitigation="Rely on the platform validation; when customizing, check the whole chain, "
                   "expiry, signatures and host name.",
    ),
)

EXTENDED_RULES = (
    Rule(
        id="WEAK_CRYPTO_ALGORITHM",
        smell_name="Weak Crypto Algorithm",
        category=_SI,
        severity="warning",
        scope="code",
        predicate=any_of(
            calls({"Ljava/security/MessageDigest;": {"getInstance"}}, test=_weak_digest),
            calls({"Ljavax/crypto/Cipher;": {"getInstance"}}, test=_weak_cipher),
        ),
        citation=_catalog_ref(_SI, "Weak Crypto Algorithm"),
        description="MD5/SHA-1 digests, ECB mode (explicit or implied by a bare algorithm "
                    "name), DES or RC4 are requested.",
        risk="Broken primitives allow collisions, pattern leakage or key recovery.",
        mitigation="Use SHA-256 or better and an authenticated mode such as AES/GCM.",
    ),
    Rule(
        id="EXPOSED_PERSISTENT_DATA",
        smell_name="Exposed Persistent Data",
        category=_SDE,
        severity="warning",
        scope="mixed",
        predicate=any_of(
            calls({"*": {"openFileOutput", "getSharedPreferences", "openOrCreateDatabase"}},
                  test=_world_mode),
            _exported_components({"provider"}),
        ),
        citation=_catalog_ref(_SDE, "Exposed Persistent Data"),
        description="Storage is opened world-readable/writable, or a content provider is "
                    "exported without a permission.",
        risk="Other apps can read or modify the stored data.",
        mitigation="Use MODE_PRIVATE, protect providers with permissions, and encrypt "
                   "sensitive data with keys held in the KeyStore.",
    ),
    Rule(
        id="UNCONSTRAINED_ICC",
        smell_name="Unconstrained Inter-Component Communication",
        category=_BAC,
        severity="info",
        scope="manifest",
        predicate=_exported_components({"activity", "service", "receiver"}),
        citation=_catalog_ref(_BAC, "Unconstrained Inter-Component Communication"),
        description="An activity, service or receiver is reachable from other apps and has "
                    "no android:permission.",
        risk="Other apps can drive the component and borrow the app's privileges.",
        mitigation="Export only what must be public and guard it with a permission.",
    ),
    Rule(
        id="UNACKNOWLEDGED_DISTRIBUTION",
        smell_name="Unacknowledged Distribution",
        category=_SI,
        severity="warning",
        scope="manifest",
        predicate=_install_packages,
        citation=_catalog_ref(_SI, "Unacknowledged Distribution"),
        description="The manifest requests android.permission.INSTALL_PACKAGES.",
        risk="Updates installed outside the store skip its vetting and may be swapped for "
             "malicious packages.",
        mitigation="Ship the app and its updates through a vetted store only.",
    ),
    Rule(
        id="NATIVE_CODE",
        smell_name="Native Code",
        category=_IAP,
        severity="info",
        scope="mixed",
        predicate=any_of(
            native_libraries(),
            calls({"Ljava/lang/System;": {"loadLibrary", "load"}}),
        ),
        citation=_catalog_ref(_IAP, "Native Code"),
        description="The bundle ships .so libraries or calls System.loadLibrary/System.load.",
        risk="Native code is hard to audit and exposes memory-safety bugs such as buffer overflows.",
        mitigation="Use native code only when needed and only from trusted sources.",
    ),
)

RULESETS = {
    "core": CORE_RULES,
    "extended": EXTENDED_RULES,
    "all": CORE_RULES + EXTENDED_RULES,
}
RULES_BY_ID = {r.id: r for r in RULESETS["all"]}


def get_ruleset(name: str) -> tuple:
    try:
        return RULESETS[name]
    except KeyError:
        raise UnknownRuleset(f"unknown ruleset {name!r}; choose from {', '.join(RULESETS)}") from None
